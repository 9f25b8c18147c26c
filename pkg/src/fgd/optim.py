"""Feedback gradient descent (FGD) and the Euclidean momentum baseline.

FGD keeps a position theta near St(n, p) and a velocity phi near its tangent
space. One step is a semi-implicit Euler step of size eta of the feedback
field, so no retraction, QR or SVD is ever needed; with the Neumann inverse
the extra cost over plain momentum descent is O(n p^2).
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import (DriftAbortError, FgdError, NotOrthonormalError,
                     NumericalBlowupError, OffNeighborhoodError, ShapeError)
from .fields import (FieldParams, feedback_phi_rate, feedback_theta_rate,
                     neighbourhood_gram)
from .geometry import (INVERSE_MODES, LyapunovParams, State, lyapunov_v,
                       stiefel_distance, tangency_residual)
from .integrators import feedback_step
from .linalg import frobenius_norm, matmul, sym


@dataclass(frozen=True)
class FgdConfig:
    eta: float = 0.1
    gamma: float = 0.1
    alpha: float = 12.0
    inverse_mode: str = "neumann"
    k: LyapunovParams = LyapunovParams()
    drift_abort: float = 0.5
    order: str = "semi_implicit"

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.inverse_mode not in INVERSE_MODES:
            raise ValueError(f"inverse_mode must be one of {INVERSE_MODES}")
        if not 0 < self.drift_abort < 1:
            raise ValueError("drift_abort must lie in (0, 1)")

    def field_params(self, eta=None):
        return FieldParams(eta=self.eta if eta is None else eta, gamma=self.gamma,
                           alpha=self.alpha, inverse_mode=self.inverse_mode)


def fgd_init(theta0, euclid_grad, tol=1e-10):
    """Initial state (theta0, -riemannian gradient at theta0)."""
    theta0 = np.asarray(theta0, dtype=np.float64)
    g = np.asarray(euclid_grad, dtype=np.float64)
    if g.shape != theta0.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match theta {theta0.shape}")
    d = stiefel_distance(theta0)
    if d > tol:
        raise NotOrthonormalError(f"fgd_init: theta0 must be orthonormal (d={d:.3e})")
    return State(theta0.copy(), matmul(theta0, sym(matmul(theta0.T, g))) - g)


def fgd_step(s, grad_provider, cfg: FgdConfig, eta=None, step=None):
    """One FGD update; ``eta`` overrides ``cfg.eta`` (learning-rate schedules).

    Raises :class:`DriftAbortError` if theta is, or would end up, at distance
    ``cfg.drift_abort`` or more from the manifold.
    """
    h = cfg.eta if eta is None else eta
    try:
        out, d_before, d_after = feedback_step(s, grad_provider, cfg.field_params(h), h,
                                               order=cfg.order, step=step)
    except OffNeighborhoodError as exc:
        raise DriftAbortError(exc.distance, cfg.drift_abort, lyapunov_v(s, cfg.k),
                              frobenius_norm(s.phi), step) from exc
    for d, st in ((d_before, s), (d_after, out)):
        if not d < cfg.drift_abort:
            raise DriftAbortError(d, cfg.drift_abort, lyapunov_v(st, cfg.k), frobenius_norm(st.phi), step)
    return out


def sgd_momentum_step(value, momentum, grad_provider, eta, gamma):
    """value += eta * momentum; momentum = (1 - gamma) momentum - grad(new value)."""
    value = np.asarray(value, dtype=np.float64)
    momentum = np.asarray(momentum, dtype=np.float64)
    if value.shape != momentum.shape:
        raise ShapeError(f"value {value.shape} and momentum {momentum.shape} differ")
    new_value = value + eta * momentum
    _, g = grad_provider(new_value)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != value.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match value {value.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericalBlowupError("non-finite gradient")
    return new_value, (1.0 - gamma) * momentum - g


# ---------------------------------------------------------------- conv reshape

def reshape_conv_param(shape):
    """(c_o, c_i, K1, K2) -> (n, p) = (c_i*K1*K2, c_o)."""
    c_o, c_i, k1, k2 = (int(x) for x in shape)
    if min(c_o, c_i, k1, k2) < 1:
        raise ShapeError(f"convolution shape must have positive dims, got {shape}")
    return c_i * k1 * k2, c_o


def should_orthogonalize(shape):
    c_o, c_i, k1, k2 = (int(x) for x in shape)
    return c_i * k1 * k2 >= c_o and min(k1, k2) > 1


def flatten_conv(tensor):
    """c_o x c_i x K1 x K2 tensor -> (c_i K1 K2) x c_o matrix, (c_i, K1, K2) row-major."""
    t = np.asarray(tensor, dtype=np.float64)
    if t.ndim != 4:
        raise ShapeError(f"expected a 4-D tensor, got shape {t.shape}")
    return np.ascontiguousarray(t.reshape(t.shape[0], -1).T)


def unflatten_conv(matrix, shape):
    c_o, c_i, k1, k2 = shape
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (c_i * k1 * k2, c_o):
        raise ShapeError(f"matrix shape {m.shape} does not match convolution shape {shape}")
    return np.ascontiguousarray(m.T.reshape(c_o, c_i, k1, k2))


# ---------------------------------------------------------------- parameter groups

@dataclass
class ParamGroup:
    """One parameter and its velocity.

    ``orthogonal`` groups hold (theta, phi) and follow FGD; ``euclidean``
    groups hold (value, momentum) and follow plain momentum descent.
    ``original_shape`` is set for reshaped convolution kernels.
    """

    kind: str
    value: np.ndarray
    velocity: np.ndarray
    original_shape: Optional[Tuple[int, int, int, int]] = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("orthogonal", "euclidean"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if np.shape(self.value) != np.shape(self.velocity):
            raise ShapeError(f"group {self.name!r}: value and velocity shapes differ")
        if self.kind == "orthogonal":
            n, p = np.shape(self.value)
            if n < p:
                raise ShapeError(f"orthogonal group {self.name!r} needs n >= p, got {n}x{p}")

    @property
    def state(self):
        return State(self.value, self.velocity)


@dataclass
class GroupDiagnostics:
    index: int
    name: str
    kind: str
    v_value: float
    stiefel_dist: float
    tangency: float


@dataclass
class StepResult:
    groups: List[ParamGroup]
    loss: float
    diagnostics: List[GroupDiagnostics] = field(default_factory=list)


class GroupStepError(FgdError):
    def __init__(self, failures):
        msg = "; ".join(f"group {i}: {e}" for i, e in failures)
        super().__init__(msg)
        self.failures = failures


def init_groups(groups, grad_fn):
    """Set every velocity to the negative (Riemannian, for orthogonal groups)
    gradient at the current values. Returns (groups, loss)."""
    loss, grads = grad_fn([g.value for g in groups])
    out = []
    for grp, g in zip(groups, grads):
        if grp.kind == "orthogonal":
            s = fgd_init(grp.value, g)
            out.append(replace(grp, value=s.theta, velocity=s.phi))
        else:
            out.append(replace(grp, velocity=-np.asarray(g, dtype=np.float64)))
    return out, loss


def diagnose(groups, k=LyapunovParams()):
    diags = []
    for i, grp in enumerate(groups):
        if grp.kind == "orthogonal":
            s = grp.state
            diags.append(GroupDiagnostics(i, grp.name, grp.kind, lyapunov_v(s, k),
                                          stiefel_distance(s.theta), tangency_residual(s)))
        else:
            diags.append(GroupDiagnostics(i, grp.name, grp.kind, float("nan"), float("nan"), float("nan")))
    return diags


def optimizer_apply(groups, grad_fn, cfg: FgdConfig, eta_now=None, record=True, step=None):
    """Advance every group by one step.

    ``grad_fn(values) -> (loss, grads)`` evaluates the joint loss and one
    gradient per group. All positions move first; the gradient is then taken
    once at the new positions and used for every velocity update, which is
    the semi-implicit pattern of :func:`fgd_step` and :func:`sgd_momentum_step`.
    """
    eta = cfg.eta if eta_now is None else eta_now
    if not eta > 0:
        raise ValueError("eta_now must be positive")
    if not groups:
        return StepResult([], float("nan"), [])
    if cfg.order != "semi_implicit":
        raise ValueError("optimizer_apply supports the semi-implicit order only")

    fp = cfg.field_params(eta)
    failures = []
    moved = []
    for i, grp in enumerate(groups):
        try:
            if grp.kind == "orthogonal":
                d = stiefel_distance(grp.value)
                if d < cfg.drift_abort:
                    gi = neighbourhood_gram(grp.value, fp.inverse_mode)[1]
                    theta = grp.value + eta * feedback_theta_rate(grp.value, grp.velocity, fp, gi)
                    d = stiefel_distance(theta)
                if not d < cfg.drift_abort:
                    raise DriftAbortError(d, cfg.drift_abort, lyapunov_v(grp.state, cfg.k),
                                          frobenius_norm(grp.velocity), step, i)
                moved.append(theta)
            else:
                moved.append(grp.value + eta * grp.velocity)
        except FgdError as exc:
            failures.append((i, exc))
            moved.append(grp.value)
    if failures:
        raise GroupStepError(failures)

    loss, grads = grad_fn(moved)
    out = []
    for i, (grp, value, g) in enumerate(zip(groups, moved, grads)):
        g = np.asarray(g, dtype=np.float64)
        try:
            if g.shape != value.shape:
                raise ShapeError(f"gradient shape {g.shape} does not match {value.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericalBlowupError("non-finite gradient", step=step)
            if grp.kind == "orthogonal":
                vel = grp.velocity + eta * feedback_phi_rate(value, grp.velocity, g, fp)
            else:
                vel = (1.0 - cfg.gamma) * grp.velocity - g
            out.append(replace(grp, value=value, velocity=vel))
        except FgdError as exc:
            failures.append((i, exc))
    if failures:
        raise GroupStepError(failures)
    return StepResult(out, float(loss), diagnose(out, cfg.k) if record else [])
