"""End-to-end acceptance criteria, one test and one PASS/FAIL line each.

Run with pytest (lines are repeated in the terminal summary) or directly:
``python3 tests/test_acceptance.py``.
"""
from dataclasses import replace
import math
import time

import numpy as np
import pytest

from fgd import _backend
from fgd.errors import DriftAbortError
from fgd.harness import verify
from fgd.harness.config import build_config
from fgd.harness.experiments import (BENCH_N_BAND, BENCH_P_BAND, decay_trajectory, fit_exponent,
                                     invariance_drift, run_toy_seed, time_steps, toy_problem_for,
                                     train_mlp)
from fgd.linalg import frobenius_norm, make_rng, random_orthonormal
from fgd.mlp import MlpModel, loss_and_grads, two_moons_split
from fgd.optim import FgdConfig, fgd_init, fgd_step
from fgd.problems import (nearest_orthogonal_closed_form, nearest_orthogonal_problem,
                          planted_procrustes, principal_angle_distance, procrustes_problem,
                          random_symmetric_with_gap, top_eigenspace, trace_min_problem)

STATES = 1000


def criterion_1():
    cfg = build_config("toy", record_wall_time=False)
    t0 = time.perf_counter()
    runs = [run_toy_seed(cfg, s) for s in range(cfg.seeds)]
    elapsed = time.perf_counter() - t0
    gaps = [r.gaps[-1] for r in runs]
    rises = [r.max_increase for r in runs]
    dists = [float(r.distances.max()) for r in runs]
    ok = max(gaps) <= 1e-2 and max(rises) <= 1e-6 and max(dists) <= 1e-2 and elapsed < 1.0
    return ok, (f"toy: worst final gap {max(gaps):.3e} (<= 1e-2), worst rise after epoch 5 "
                f"{max(rises):.3e} (<= 1e-6), worst max distance {max(dists):.3e} (<= 1e-2), "
                f"{elapsed:.2f} s (< 1 s)")


def criterion_2():
    cfg = build_config("decay")
    t0 = time.perf_counter()
    traj = decay_trajectory(cfg)
    elapsed = time.perf_counter() - t0
    t, v = np.array(traj.times), np.array(traj.v_values)
    err = float(np.max(np.abs(np.log(v) + cfg.alpha * t - math.log(v[0]))))
    ok = 1e-4 <= v[0] <= 1e-2 and err <= 1e-3 and elapsed < 5.0
    return ok, f"decay: V(0) {v[0]:.2e}, max log error {err:.3e} (<= 1e-3), {elapsed:.2f} s (< 5 s)"


def criterion_3():
    r = verify.prop_x_preserves_v(STATES, 0, 1.0)
    return r.passed, f"<grad V, X> = 0: {r.cases} states, worst scaled residual {r.worst:.3e} (<= 1e-10)"


def criterion_4():
    m = verify.prop_metric_identity(STATES, 0, 1.0)
    f = verify.prop_feedback_equals_alpha_l_gradv(STATES, 0, 1.0)
    return m.passed and f.passed, (f"<grad V, L grad V> = V: worst rel {m.worst:.3e} (<= 1e-8); "
                                   f"feedback = alpha L grad V: worst rel {f.worst:.3e} (<= 1e-10)")


def criterion_5():
    cfg = build_config("invariance")
    d1 = float(invariance_drift(cfg, 1e-3)[1].max())
    d2 = float(invariance_drift(cfg, 5e-4)[1].max())
    ratio = d1 / d2
    return d1 <= 1e-9 and 8 <= ratio <= 32, f"invariance: drift {d1:.3e} (<= 1e-9), halving ratio {ratio:.2f} (in [8, 32])"


def criterion_6():
    r = verify.prop_neumann_bound(STATES, 0, 1.0)
    return r.passed, f"neumann bound: {r.cases} Gram matrices, worst error/bound {r.worst:.6f}, violations {'none' if r.passed else 'found'}"


def _toy_distances(seed, cfg, steps):
    prob, _, _, theta0 = toy_problem_for(seed)
    s = fgd_init(theta0, prob.grad_at(theta0))
    dists = [frobenius_norm(s.theta.T @ s.theta - np.eye(s.theta.shape[1]))]
    for i in range(steps):
        try:
            s = fgd_step(s, prob, cfg, step=i + 1)
        except DriftAbortError as exc:
            dists.append(exc.distance)
            break
        dists.append(frobenius_norm(s.theta.T @ s.theta - np.eye(s.theta.shape[1])))
    return max(dists)


def criterion_7():
    parts = []
    ok = True
    for seed in range(5):
        d12 = _toy_distances(seed, FgdConfig(), 60)
        d0 = _toy_distances(seed, FgdConfig(alpha=0.0, drift_abort=0.99), 100)
        ok &= d12 <= 1e-2 and d0 > 10 * d12
        parts.append(f"seed {seed}: {d12:.3e} vs control {d0:.3f}")
    return ok, "drift bound (<= 1e-2; control > 10x): " + "; ".join(parts)


def criterion_8():
    t0 = time.perf_counter()
    cfg = build_config("bench")
    tn = [time_steps(n, cfg.bench_fixed_p, "neumann", cfg.bench_repeats) for n in cfg.bench_n]
    tp = [time_steps(cfg.bench_fixed_n, p, "neumann", cfg.bench_repeats) for p in cfg.bench_p]
    te = time_steps(cfg.bench_fixed_n, max(cfg.bench_p), "exact", cfg.bench_repeats)
    en, ep = fit_exponent(cfg.bench_n, tn), fit_exponent(cfg.bench_p, tp)
    elapsed = time.perf_counter() - t0
    ok = (BENCH_N_BAND[0] <= en <= BENCH_N_BAND[1] and BENCH_P_BAND[0] <= ep <= BENCH_P_BAND[1]
          and tp[-1] < te and elapsed < 60)
    return ok, (f"complexity ({_backend.BACKEND}): n exponent {en:.3f}, p exponent {ep:.3f}, "
                f"neumann {tp[-1] / 1e6:.1f} ms vs exact {te / 1e6:.1f} ms at p = {max(cfg.bench_p)}, {elapsed:.1f} s")


def criterion_9():
    worst_angle = 0.0
    for seed in range(3):
        a = random_symmetric_with_gap(10, 3, seed)
        prob = trace_min_problem(a, 3)
        theta0 = random_orthonormal(10, 3, seed + 50)
        s = fgd_init(theta0, prob.grad_at(theta0))
        cfg = FgdConfig(eta=0.05)
        for i in range(3000):
            s = fgd_step(s, prob, cfg, step=i + 1)
        worst_angle = max(worst_angle, principal_angle_distance(s.theta, top_eigenspace(a, 3)[0]))
    margin = math.inf
    for seed in range(3):
        v = make_rng(seed, 40).standard_normal((5, 3))
        _, f0 = nearest_orthogonal_closed_form(v)
        rng = make_rng(seed, 41)
        for _ in range(10_000):
            q, r = np.linalg.qr(rng.standard_normal((5, 3)))
            margin = min(margin, frobenius_norm(q * np.sign(np.diag(r)) - v) - f0)
    ok = worst_angle <= 1e-4 and margin >= -1e-9
    return ok, f"oracles: subspace distance {worst_angle:.3e} (<= 1e-4), brute force margin {margin:.3e} (>= -1e-9)"


def _fd(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        g[idx] = (f(xp) - f(xm)) / (2 * eps)
    return g


def criterion_10():
    rng = make_rng(0, 50)
    probs = [nearest_orthogonal_problem(rng.standard_normal((5, 3))),
             procrustes_problem(rng.standard_normal((3, 7)), rng.standard_normal((6, 7))),
             planted_procrustes(6, 3, 10, 0)[0],
             trace_min_problem(random_symmetric_with_gap(8, 3, 0), 3)]
    worst = 0.0
    for prob in probs:
        for _ in range(10):
            w = rng.standard_normal(prob.dims)
            g = prob.grad_at(w)
            worst = max(worst, frobenius_norm(_fd(prob.loss_at, w) - g) / frobenius_norm(g))
    train, _ = two_moons_split(400, 400, 0.1, 0)
    params = MlpModel.init(9, 8, 2, 0).params
    params = [p + 0.3 * make_rng(0, 60 + i).standard_normal(p.shape) for i, p in enumerate(params)]
    grads = loss_and_grads(params, train)[1]
    worst_mlp = 0.0
    for k, (p, g) in enumerate(zip(params, grads)):
        def f(x):
            return loss_and_grads(params[:k] + [x] + params[k + 1:], train)[0]
        worst_mlp = max(worst_mlp, frobenius_norm(_fd(f, p) - g) / frobenius_norm(g))
    ok = worst <= 1e-5 and worst_mlp <= 1e-4
    return ok, f"gradients: problems worst rel {worst:.3e} (<= 1e-5), MLP worst rel {worst_mlp:.3e} (<= 1e-4)"


def criterion_11():
    cfg = build_config("mlp", record_wall_time=False)
    fgd_run, _ = train_mlp(cfg, True)
    sgd_run, _ = train_mlp(cfg, False)
    d_fgd = fgd_run.rows[-1].stiefel_dist
    d_sgd = sgd_run.rows[-1].stiefel_dist
    ok = d_fgd <= 1e-5 and d_sgd > 1e-1
    return ok, (f"mlp: FGD final distance {d_fgd:.3e} (<= 1e-5), momentum baseline {d_sgd:.3f} (> 1e-1), "
                f"FGD test accuracy {fgd_run.test_acc[-1]:.4f}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


def line(number, ok, detail):
    return f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {detail}"


@pytest.mark.parametrize("number", range(1, len(CRITERIA) + 1))
def test_criterion(number, acceptance_line):
    ok, detail = CRITERIA[number - 1]()
    acceptance_line(line(number, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for i, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        results.append(ok)
        print(line(i, ok, detail), flush=True)
    print(f"{sum(results)}/{len(results)} criteria passed")
    raise SystemExit(0 if all(results) else 1)
