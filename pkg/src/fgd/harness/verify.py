"""Property battery: identities, invariance and bounds over seeded random states.

Each property reports how many cases it checked, its worst residual and the
tolerance it was held to. ``corrupt_feedback_sign`` flips the sign of the
feedback term wherever the battery builds it, which must make the
feedback-related properties fail.
"""
from dataclasses import dataclass
from functools import partial
import math
import os

import numpy as np

from ..fields import (FieldParams, feedback_phi_rate, feedback_term, feedback_theta_rate,
                      field_extended_x, field_feedback_full)
from ..geometry import (LyapunovParams, _project, gram_inverse_of, lyapunov_grad_v, lyapunov_v,
                        metric_l_apply, neumann_error_bound, stiefel_distance)
from ..linalg import frobenius_inner, frobenius_norm, invert_spd, make_rng, matmul, sym
from ..sampling import random_gram, random_state_in_s
from .experiments import Outcome, decay_trajectory, invariance_drift
from .metrics import write_table


@dataclass
class PropertyResult:
    name: str
    cases: int
    worst: float
    tolerance: float
    passed: bool


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _pair_norm(a, b):
    return math.hypot(frobenius_norm(a), frobenius_norm(b))


def _case(rng, n_max=8):
    n = int(rng.integers(2, n_max + 1))
    p = int(rng.integers(1, n + 1))
    s = random_state_in_s(rng, n, p, d_max=0.9, phi_scale=rng.uniform(0.1, 2.0))
    fp = FieldParams(eta=rng.uniform(0.01, 1.0), gamma=rng.uniform(0.0, 1.0),
                     alpha=rng.uniform(0.5, 20.0), inverse_mode="exact")
    k = LyapunovParams(math.exp(rng.uniform(math.log(0.1), math.log(10.0))),
                       math.exp(rng.uniform(math.log(0.1), math.log(10.0))))
    g = rng.standard_normal((n, p))
    return s, fp, k, g


def _feedback(s, fp, sign):
    ft, fph = feedback_term(s, fp)
    return sign * ft, sign * fph


def _worst(name, values, tol, cases):
    worst = max(values) if values else 0.0
    return PropertyResult(name, cases, worst, tol, worst <= tol)


def prop_x_preserves_v(count, seed, sign):
    rng = make_rng(seed, 101)
    res = []
    for _ in range(count):
        s, fp, k, g = _case(rng)
        gt, gp = lyapunov_grad_v(s, k)
        xt, xp = field_extended_x(s, g, fp)
        inner = frobenius_inner(gt, xt) + frobenius_inner(gp, xp)
        res.append(abs(inner) / max(1.0, _pair_norm(gt, gp) * _pair_norm(xt, xp)))
    return _worst("x_preserves_v", res, 1e-10, count)


def prop_metric_identity(count, seed, sign):
    rng = make_rng(seed, 102)
    res = []
    for _ in range(count):
        s, fp, k, _ = _case(rng)
        gt, gp = lyapunov_grad_v(s, k)
        lt, lp = metric_l_apply(s, gt, gp, k, "exact")
        res.append(_rel(frobenius_inner(gt, lt) + frobenius_inner(gp, lp), lyapunov_v(s, k)))
    return _worst("metric_gradv_equals_v", res, 1e-8, count)


def prop_feedback_equals_alpha_l_gradv(count, seed, sign):
    rng = make_rng(seed, 103)
    res = []
    for _ in range(count):
        s, fp, k, _ = _case(rng)
        gt, gp = lyapunov_grad_v(s, k)
        lt, lp = metric_l_apply(s, gt, gp, k, "exact")
        ft, fph = _feedback(s, fp, sign)
        diff = _pair_norm(ft - fp.alpha * lt, fph - fp.alpha * lp)
        res.append(diff / max(fp.alpha * _pair_norm(lt, lp), 1e-300))
    return _worst("feedback_equals_alpha_metric_gradv", res, 1e-10, count)


def prop_v_rate(count, seed, sign):
    """<grad V, X - feedback> = -alpha V along the full field."""
    rng = make_rng(seed, 104)
    res = []
    for _ in range(count):
        s, fp, k, g = _case(rng)
        gt, gp = lyapunov_grad_v(s, k)
        xt, xp = field_extended_x(s, g, fp)
        ft, fph = _feedback(s, fp, sign)
        rate = frobenius_inner(gt, xt - ft) + frobenius_inner(gp, xp - fph)
        v = lyapunov_v(s, k)
        scale = 1e-10 * max(1.0, _pair_norm(gt, gp) * _pair_norm(xt, xp)) + 1e-8 * fp.alpha * v
        res.append(abs(rate + fp.alpha * v) / scale)
    return _worst("v_rate_equals_minus_alpha_v", res, 1.0, count)


def prop_fused_rates(count, seed, sign):
    rng = make_rng(seed, 105)
    res = []
    for _ in range(count):
        s, fp, _, g = _case(rng)
        ct, cp = field_feedback_full(s, g, fp)
        rt = feedback_theta_rate(s.theta, s.phi, fp)
        rp = feedback_phi_rate(s.theta, s.phi, g, fp)
        res.append(_pair_norm(rt - ct, rp - cp) / max(1.0, _pair_norm(ct, cp)))
    return _worst("fused_rates_match_field", res, 1e-10, count)


def prop_grad_v_fd(count, seed, sign):
    rng = make_rng(seed, 106)
    res = []
    eps = 1e-6
    for _ in range(count):
        s, _, k, _ = _case(rng)
        dt = rng.standard_normal(s.theta.shape)
        dp = rng.standard_normal(s.theta.shape)
        gt, gp = lyapunov_grad_v(s, k)
        exact = frobenius_inner(gt, dt) + frobenius_inner(gp, dp)
        plus = lyapunov_v(type(s)(s.theta + eps * dt, s.phi + eps * dp), k)
        minus = lyapunov_v(type(s)(s.theta - eps * dt, s.phi - eps * dp), k)
        fd = (plus - minus) / (2 * eps)
        res.append(abs(fd - exact) / max(1e-6, abs(exact)))
    return _worst("grad_v_finite_difference", res, 1e-5, count)


def prop_neumann_bound(count, seed, sign):
    """||(2I - G) - G^{-1}|| <= d^2/(1-d), the error taken as ||G^{-1}(G - I)^2||,
    which is the same matrix without the cancellation of the direct difference."""
    rng = make_rng(seed, 107)
    violations = 0
    worst = 0.0
    for _ in range(count):
        p = int(rng.integers(2, 9))
        d = 0.5 * (1.0 - rng.uniform(0.0, 1.0))   # (0, 0.5]
        g = random_gram(rng, p, d)
        e = g - np.eye(p)
        err = frobenius_norm(matmul(invert_spd(g), matmul(e, e)))
        bound = neumann_error_bound(frobenius_norm(e))
        worst = max(worst, err / bound)
        violations += err > bound
    return PropertyResult("neumann_error_bound", count, worst, 1.0, violations == 0)


def prop_projection(count, seed, sign):
    rng = make_rng(seed, 108)
    res = []
    for _ in range(count):
        n = int(rng.integers(2, 9))
        p = int(rng.integers(1, n + 1))
        q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        m = rng.standard_normal((n, p))
        z = _project(q, m)
        res.append(max(frobenius_norm(sym(q.T @ z)), frobenius_norm(_project(q, z) - z)))
    return _worst("tangent_projection_idempotent", res, 1e-12, count)


def prop_decay(cfg, sign):
    dc = _decay_cfg(cfg)
    field = None
    if sign != 1.0:
        fp = FieldParams(dc.eta, dc.gamma, dc.alpha, dc.inverse_mode)

        def field(s, g):
            xt, xp = field_extended_x(s, g, fp)
            ft, fph = _feedback(s, fp, sign)
            return xt - ft, xp - fph
    traj = decay_trajectory(dc, field)
    t = np.array(traj.times)
    v = np.array(traj.v_values)
    err = np.abs(np.log(v) + dc.alpha * t - np.log(v[0]))
    return _worst("exponential_v_decay", [float(err.max())], 1e-3, len(t))


def _decay_cfg(cfg):
    from dataclasses import replace
    return replace(cfg, experiment="decay", alpha=5.0, inverse_mode="exact", h=1e-3, t_end=1.0,
                   v0=1e-3, n=5, p=3, stride=1)


def prop_invariance(cfg, sign):
    from dataclasses import replace
    ic = replace(cfg, experiment="invariance", n=5, p=3, h=1e-3, t_end=1.0, stride=1)
    d1 = float(invariance_drift(ic, 1e-3)[1].max())
    d2 = float(invariance_drift(ic, 5e-4)[1].max())
    ratio = d1 / d2 if d2 > 0 else math.inf
    ok = d1 <= 1e-9 and 8.0 <= ratio <= 32.0
    return PropertyResult(f"bundle_invariance (ratio {ratio:.2f})", 2, d1, 1e-9, ok)


STATE_PROPERTIES = (prop_x_preserves_v, prop_metric_identity, prop_feedback_equals_alpha_l_gradv,
                    prop_v_rate, prop_fused_rates, prop_grad_v_fd, prop_neumann_bound,
                    prop_projection)


def run_battery(cfg):
    sign = -1.0 if cfg.corrupt_feedback_sign else 1.0
    results = [prop(cfg.states, cfg.seed, sign) for prop in STATE_PROPERTIES]
    results.append(prop_decay(cfg, sign))
    results.append(prop_invariance(cfg, sign))
    return results


def run_verify(cfg, out_dir):
    results = run_battery(cfg)
    out = Outcome(all(r.passed for r in results))
    if cfg.corrupt_feedback_sign:
        out.say("feedback sign deliberately corrupted")
    for r in results:
        out.say(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.cases} cases, "
                f"worst {r.worst:.6e} (tol {r.tolerance:g})")
    failed = [r.name for r in results if not r.passed]
    out.say(f"{len(results) - len(failed)}/{len(results)} properties passed"
            + (f"; failed: {', '.join(failed)}" if failed else ""))
    path = os.path.join(out_dir, "verify.csv")
    write_table(path, ["property", "cases", "worst", "tolerance", "passed"],
                [[r.name, r.cases, r.worst, r.tolerance, int(r.passed)] for r in results])
    out.files.append(path)
    return out
