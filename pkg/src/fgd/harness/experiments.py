"""Experiment runners behind the ``fgd`` command.

Each runner takes a validated :class:`RunConfig` and an output directory,
writes its files there and returns an :class:`Outcome`. Numerical aborts
propagate as :class:`FgdError` and are turned into exit codes by the CLI.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
import math
import os
import time
from typing import List

import numpy as np

from .. import _backend
from ..fields import FieldParams, field_feedback_full, field_tangent_bundle
from ..geometry import LyapunovParams, State, lyapunov_v, stiefel_distance, tangency_residual
from ..integrators import frozen_gradient, integrate, zero_gradient
from ..linalg import make_rng, random_orthonormal
from ..mlp import MlpModel, accuracy, export_dataset, mlp_problem, two_moons_split
from ..optim import FgdConfig, ParamGroup, fgd_init, fgd_step, init_groups, optimizer_apply
from ..problems import nearest_orthogonal_closed_form, nearest_orthogonal_problem
from ..sampling import on_bundle_state, perturbed_state
from .metrics import MetricsRow, write_metrics, write_table
from .modelio import save_model

# Frozen acceptance thresholds.
TOY_FINAL_GAP = 1e-2
TOY_MAX_DISTANCE = 1e-2
TOY_MONOTONE_FROM = 5
TOY_JITTER = 1e-6
DECAY_LOG_ERROR = 1e-3
DECAY_CONSTANT_TOL = 1e-10
DECAY_ZERO_TOL = 1e-12
INVARIANCE_DRIFT = 1e-9
INVARIANCE_RATIO = (8.0, 32.0)
BENCH_N_BAND = (0.8, 1.3)
BENCH_P_BAND = (1.5, 2.6)
MLP_FGD_DISTANCE = 1e-5
MLP_SGD_DISTANCE = 1e-1
MLP_TEST_ACCURACY = 0.95


@dataclass
class Outcome:
    passed: bool
    lines: List[str] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    def say(self, text):
        self.lines.append(text)


def _clock(cfg):
    if cfg.record_wall_time:
        return time.perf_counter_ns
    return lambda: 0


def _check(outcome, ok, text):
    outcome.say(("PASS  " if ok else "FAIL  ") + text)
    outcome.passed = outcome.passed and ok
    return ok


# ---------------------------------------------------------------- toy

@dataclass
class ToyRun:
    seed: int
    rows: List[MetricsRow]
    f0: float

    @property
    def gaps(self):
        return np.array([r.loss_gap for r in self.rows])

    @property
    def distances(self):
        return np.array([r.stiefel_dist for r in self.rows])

    @property
    def max_increase(self):
        g = self.gaps[TOY_MONOTONE_FROM:]
        return float(np.max(np.diff(g))) if len(g) > 1 else 0.0


def toy_problem_for(seed, n=5, p=3):
    """(problem, W0, f0, theta0) for one toy seed."""
    v = make_rng(seed, 11).standard_normal((n, p))
    prob = nearest_orthogonal_problem(v)
    w0, f0 = nearest_orthogonal_closed_form(v)
    return prob, w0, f0, random_orthonormal(n, p, seed)


def run_toy_seed(cfg, seed):
    """One full-batch run: one FGD step per epoch, epoch 0 recorded."""
    fcfg = cfg.fgd()
    clock = _clock(cfg)
    prob, _, f0, theta0 = toy_problem_for(seed, cfg.n, cfg.p)
    s = fgd_init(theta0, prob.grad_at(theta0))

    def row(e, s, dt):
        loss = prob.loss_at(s.theta)
        return MetricsRow(e, e, loss, loss - f0, lyapunov_v(s, fcfg.k),
                          stiefel_distance(s.theta), tangency_residual(s), dt)

    rows = [row(0, s, 0)]
    for e in range(1, cfg.epochs + 1):
        t0 = clock()
        s = fgd_step(s, prob, fcfg, step=e)
        rows.append(row(e, s, clock() - t0))
    return ToyRun(seed, rows, f0)


def _map_seeds(cfg, fn, seeds):
    if cfg.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, seeds))
    return [fn(sd) for sd in seeds]


def run_toy(cfg, out_dir):
    seeds = [cfg.seed + i for i in range(cfg.seeds)]
    runs = _map_seeds(cfg, partial(run_toy_seed, cfg), seeds)
    out = Outcome(True)
    summary = []
    for run in runs:
        path = os.path.join(out_dir, f"toy_seed{run.seed}.csv")
        write_metrics(path, run.rows)
        out.files.append(path)
        final_gap = run.gaps[-1]
        max_d = float(run.distances.max())
        ok = [final_gap <= TOY_FINAL_GAP, run.max_increase <= TOY_JITTER, max_d <= TOY_MAX_DISTANCE]
        summary.append([run.seed, final_gap, max_d, run.distances[-1], run.max_increase, int(all(ok))])
        _check(out, ok[0], f"seed {run.seed}: final loss_gap {final_gap:.3e} <= {TOY_FINAL_GAP:g}")
        _check(out, ok[1], f"seed {run.seed}: largest loss_gap increase after epoch "
                           f"{TOY_MONOTONE_FROM} {run.max_increase:.3e} <= {TOY_JITTER:g}")
        _check(out, ok[2], f"seed {run.seed}: max distance {max_d:.3e} <= {TOY_MAX_DISTANCE:g}")
    path = os.path.join(out_dir, "toy_summary.csv")
    write_table(path, ["seed", "final_loss_gap", "max_distance", "final_distance",
                       "max_gap_increase", "passed"], summary)
    out.files.append(path)
    if cfg.plot:
        from .plotting import plot_toy
        out.files.append(plot_toy(runs, out_dir))
    return out


# ---------------------------------------------------------------- decay

def decay_start(cfg):
    k = LyapunovParams(cfg.k1, cfg.k2)
    if cfg.v0 == 0:
        return on_bundle_state(cfg.n, cfg.p, cfg.seed, cfg.phi_scale)
    return perturbed_state(cfg.n, cfg.p, cfg.seed, cfg.v0, k, cfg.phi_scale)


def decay_trajectory(cfg, field=None):
    """RK4 trajectory of the full feedback field (zero loss gradient)."""
    fp = FieldParams(eta=cfg.eta, gamma=cfg.gamma, alpha=cfg.alpha, inverse_mode=cfg.inverse_mode)
    f = field or partial(field_feedback_full, p=fp)
    return integrate(f, decay_start(cfg), zero_gradient, cfg.h, cfg.t_end,
                     k=LyapunovParams(cfg.k1, cfg.k2), stride=cfg.stride)


def run_decay(cfg, out_dir):
    traj = decay_trajectory(cfg)
    t = np.array(traj.times)
    v = np.array(traj.v_values)
    v0 = v[0]
    pred = v0 * np.exp(-cfg.alpha * t)
    rows = []
    log_err = []
    for ti, vi, pi in zip(t, v, pred):
        le = abs(math.log(vi) - math.log(pi)) if vi > 0 and pi > 0 else None
        log_err.append(le)
        rows.append([ti, vi, pi, le])
    out = Outcome(True)
    path = os.path.join(out_dir, "decay.csv")
    write_table(path, ["t", "V", "predicted", "log_error"], rows)
    out.files.append(path)
    out.say(f"V(0) = {v0:.6e}, alpha = {cfg.alpha:g}, steps = {len(t) - 1}")
    if cfg.v0 == 0:
        _check(out, float(v.max()) <= DECAY_ZERO_TOL,
               f"on-bundle start: max V {v.max():.3e} <= {DECAY_ZERO_TOL:g}")
    elif cfg.alpha == 0:
        dv = float(np.max(np.abs(v - v0)))
        _check(out, dv <= DECAY_CONSTANT_TOL, f"alpha = 0: max |V - V(0)| {dv:.3e} <= {DECAY_CONSTANT_TOL:g}")
    else:
        worst = max(e for e in log_err if e is not None)
        _check(out, worst <= DECAY_LOG_ERROR,
               f"max |ln V - ln predicted| {worst:.3e} <= {DECAY_LOG_ERROR:g}")
    if cfg.plot:
        from .plotting import plot_decay
        out.files.append(plot_decay(t, v, pred, out_dir))
    return out


# ---------------------------------------------------------------- invariance

def invariance_drift(cfg, h):
    """Tangent-bundle flow of the toy problem from its FGD start, step h.

    Returns (times, distances, tangency residuals)."""
    fp = FieldParams(eta=cfg.eta, gamma=cfg.gamma, alpha=cfg.alpha, inverse_mode=cfg.inverse_mode)
    prob, _, _, theta0 = toy_problem_for(cfg.seed, cfg.n, cfg.p)
    s0 = fgd_init(theta0, prob.grad_at(theta0))
    traj = integrate(partial(field_tangent_bundle, p=fp), s0, prob, h, cfg.t_end, stride=cfg.stride)
    return (np.array(traj.times), np.array(traj.distances),
            np.array([tangency_residual(s) for s in traj.states]))


def run_invariance(cfg, out_dir):
    out = Outcome(True)
    drifts = []
    for tag, h in (("h", cfg.h), ("h_half", cfg.h / 2)):
        t, d, tg = invariance_drift(cfg, h)
        path = os.path.join(out_dir, f"invariance_{tag}.csv")
        write_table(path, ["t", "stiefel_dist", "tangency"], zip(t, d, tg))
        out.files.append(path)
        drifts.append(float(d.max()))
        out.say(f"h = {h:g}: max drift {d.max():.3e}, max tangency {tg.max():.3e}")
    ratio = drifts[0] / drifts[1] if drifts[1] > 0 else math.inf
    _check(out, drifts[0] <= INVARIANCE_DRIFT, f"max drift {drifts[0]:.3e} <= {INVARIANCE_DRIFT:g}")
    lo, hi = INVARIANCE_RATIO
    _check(out, lo <= ratio <= hi, f"drift ratio h vs h/2 {ratio:.2f} in [{lo:g}, {hi:g}]")
    return out


# ---------------------------------------------------------------- bench

def time_steps(n, p, mode, repeats, seed=0, eta=0.01, drift_abort=0.9):
    """Median wall time (ns) of one FGD step at size n x p."""
    theta = random_orthonormal(n, p, seed)
    g = 0.01 * make_rng(seed, 31).standard_normal((n, p))
    fcfg = FgdConfig(eta=eta, gamma=0.1, alpha=12.0, inverse_mode=mode, drift_abort=drift_abort)
    provider = frozen_gradient(g)
    s = fgd_step(fgd_init(theta, g), provider, fcfg)   # warm-up (and JIT compile)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        s = fgd_step(s, provider, fcfg)
        times.append(time.perf_counter_ns() - t0)
    return float(np.median(times))


def fit_exponent(sizes, times):
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def run_bench(cfg, out_dir):
    out = Outcome(True)
    rows = []
    tn = []
    for n in cfg.bench_n:
        tn.append(time_steps(n, cfg.bench_fixed_p, "neumann", cfg.bench_repeats, cfg.seed, cfg.eta, cfg.drift_abort))
        rows.append(["n", n, cfg.bench_fixed_p, "neumann", tn[-1]])
    tp = []
    for p in cfg.bench_p:
        tp.append(time_steps(cfg.bench_fixed_n, p, "neumann", cfg.bench_repeats, cfg.seed, cfg.eta, cfg.drift_abort))
        rows.append(["p", cfg.bench_fixed_n, p, "neumann", tp[-1]])
    p_max = max(cfg.bench_p)
    t_exact = time_steps(cfg.bench_fixed_n, p_max, "exact", cfg.bench_repeats, cfg.seed, cfg.eta, cfg.drift_abort)
    t_neumann = tp[list(cfg.bench_p).index(p_max)]
    rows.append(["mode", cfg.bench_fixed_n, p_max, "exact", t_exact])
    path = os.path.join(out_dir, "bench.csv")
    write_table(path, ["sweep", "n", "p", "mode", "median_ns"], rows)
    out.files.append(path)
    out.say(f"backend: {_backend.BACKEND}")
    en, ep = fit_exponent(cfg.bench_n, tn), fit_exponent(cfg.bench_p, tp)
    _check(out, BENCH_N_BAND[0] <= en <= BENCH_N_BAND[1], f"n exponent {en:.3f} in {list(BENCH_N_BAND)}")
    _check(out, BENCH_P_BAND[0] <= ep <= BENCH_P_BAND[1], f"p exponent {ep:.3f} in {list(BENCH_P_BAND)}")
    _check(out, t_neumann < t_exact, f"neumann {t_neumann / 1e6:.2f} ms < exact {t_exact / 1e6:.2f} ms "
                                     f"at p = {p_max} (ratio {t_exact / t_neumann:.2f})")
    return out


# ---------------------------------------------------------------- mlp

@dataclass
class MlpRun:
    rows: List[MetricsRow]
    test_acc: List[float]
    groups: List[ParamGroup]


def train_mlp(cfg, orthogonal=True):
    """Train the two-layer network; ``orthogonal=False`` is the momentum baseline."""
    fcfg = cfg.fgd()
    clock = _clock(cfg)
    train, test = two_moons_split(cfg.train_size, cfg.test_size, cfg.noise, cfg.seed)
    model = MlpModel.init(train.features.shape[1], cfg.hidden, 2, cfg.seed)
    groups = model.groups()
    if not orthogonal:
        groups = [replace(g, kind="euclidean") for g in groups]
    grad_fn = mlp_problem(model, train)
    groups, loss = init_groups(groups, grad_fn)

    def row(e, groups, loss, dt):
        s = groups[0].state
        return MetricsRow(e, e, loss, None, lyapunov_v(s, fcfg.k), stiefel_distance(s.theta),
                          tangency_residual(s), dt)

    rows = [row(0, groups, loss, 0)]
    accs = [accuracy([g.value for g in groups], test)]
    eta = cfg.eta
    for e in range(1, cfg.epochs + 1):
        if e in cfg.schedule_epochs:
            eta *= cfg.schedule_factor
        t0 = clock()
        res = optimizer_apply(groups, grad_fn, fcfg, eta_now=eta, record=False, step=e)
        groups = res.groups
        rows.append(row(e, groups, res.loss, clock() - t0))
        accs.append(accuracy([g.value for g in groups], test))
    return MlpRun(rows, accs, groups), (train, test)


def run_mlp(cfg, out_dir):
    out = Outcome(True)
    runs = [("fgd", True)] + ([("sgd", False)] if cfg.baseline else [])
    results = {}
    for tag, orth in runs:
        run, (train, test) = train_mlp(cfg, orth)
        results[tag] = run
        path = os.path.join(out_dir, f"mlp_{tag}.csv")
        write_metrics(path, run.rows, {"test_acc": run.test_acc})
        out.files.append(path)
        path = os.path.join(out_dir, f"model_{tag}.bin")
        save_model(path, [(g.name, g.kind, g.value) for g in run.groups])
        out.files.append(path)
    for name, ds in (("train", train), ("test", test)):
        path = os.path.join(out_dir, f"dataset_{name}.csv")
        export_dataset(ds, path)
        out.files.append(path)
    fgd = results["fgd"]
    d_fgd = fgd.rows[-1].stiefel_dist
    _check(out, fgd.test_acc[-1] >= MLP_TEST_ACCURACY,
           f"FGD test accuracy {fgd.test_acc[-1]:.4f} >= {MLP_TEST_ACCURACY:g}")
    _check(out, d_fgd <= MLP_FGD_DISTANCE, f"FGD final orthogonal-layer distance {d_fgd:.3e} <= {MLP_FGD_DISTANCE:g}")
    out.say(f"FGD max distance over training {max(r.stiefel_dist for r in fgd.rows):.3e}")
    if "sgd" in results:
        sgd = results["sgd"]
        d_sgd = sgd.rows[-1].stiefel_dist
        out.say(f"SGD test accuracy {sgd.test_acc[-1]:.4f}")
        _check(out, d_sgd > MLP_SGD_DISTANCE, f"SGD final distance {d_sgd:.3e} > {MLP_SGD_DISTANCE:g}")
    if cfg.plot:
        from .plotting import plot_mlp
        out.files.append(plot_mlp(results, out_dir))
    return out


RUNNERS = {
    "toy": run_toy,
    "decay": run_decay,
    "invariance": run_invariance,
    "bench": run_bench,
    "mlp": run_mlp,
}
