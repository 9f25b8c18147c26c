"""Fixed-step time integrators over :class:`~fgd.geometry.State`.

A *field* is a callable ``field(state, euclid_grad) -> (d_theta, d_phi)``
(bind parameters with ``functools.partial``). A *gradient provider* maps a
position to ``(loss, euclid_grad)``; ``None`` means a zero gradient.
"""
from dataclasses import dataclass, field as dc_field
from typing import Callable, List, Optional

import numpy as np

from .errors import FgdError, NumericalBlowupError, OffNeighborhoodError
from .fields import (FieldParams, feedback_phi_rate, feedback_theta_rate,
                     neighbourhood_gram)
from .geometry import LyapunovParams, State, lyapunov_v, stiefel_distance


def zero_gradient(theta):
    return 0.0, np.zeros_like(theta)


def frozen_gradient(g):
    g = np.array(g, dtype=np.float64)
    return lambda theta: (0.0, g)


def _grad(grad_provider, theta):
    if grad_provider is None:
        return np.zeros_like(theta)
    return grad_provider(theta)[1]


def _finite(*arrays):
    return all(np.all(np.isfinite(a)) for a in arrays)


def _rate(field, s, grad_provider, step):
    dt, dp = field(s, _grad(grad_provider, s.theta))
    if not _finite(dt, dp):
        raise NumericalBlowupError("non-finite field value", step=step)
    return dt, dp


def euler_step(field, s, grad_provider, h, step=None):
    if not h > 0:
        raise ValueError("step size must be positive")
    dt, dp = _rate(field, s, grad_provider, step)
    return State(s.theta + h * dt, s.phi + h * dp)


def rk4_step(field, s, grad_provider, h, step=None):
    if not h > 0:
        raise ValueError("step size must be positive")
    k1t, k1p = _rate(field, s, grad_provider, step)
    s2 = State(s.theta + 0.5 * h * k1t, s.phi + 0.5 * h * k1p)
    k2t, k2p = _rate(field, s2, grad_provider, step)
    s3 = State(s.theta + 0.5 * h * k2t, s.phi + 0.5 * h * k2p)
    k3t, k3p = _rate(field, s3, grad_provider, step)
    s4 = State(s.theta + h * k3t, s.phi + h * k3p)
    k4t, k4p = _rate(field, s4, grad_provider, step)
    return State(s.theta + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
                 s.phi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p))


def semi_implicit_euler(theta_rate, phi_rate, s, h, step=None):
    """Symplectic-Euler pattern: move theta with the current velocity, then
    update phi with the rate evaluated at the *new* theta.

    ``theta_rate(theta, phi)`` and ``phi_rate(theta, phi)`` return arrays.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    dt = theta_rate(s.theta, s.phi)
    if not _finite(dt):
        raise NumericalBlowupError("non-finite theta rate", step=step)
    theta = s.theta + h * dt
    dp = phi_rate(theta, s.phi)
    if not _finite(dp):
        raise NumericalBlowupError("non-finite phi rate", step=step)
    return State(theta, s.phi + h * dp)


def semi_implicit_step(s, grad_provider, p: FieldParams, h, order="semi_implicit", step=None):
    """One semi-implicit Euler step of the full feedback field.

    theta moves first; phi is then updated with the gradient and the field
    evaluated at the new theta. ``order="explicit"`` evaluates the phi update
    at the old theta instead.
    """
    return feedback_step(s, grad_provider, p, h, order, step)[0]


def feedback_step(s, grad_provider, p: FieldParams, h, order="semi_implicit", step=None):
    """:func:`semi_implicit_step` that also returns the distances
    ``(d_before, d_after)`` it computed on the way (no extra Gram products)."""
    if order not in ("semi_implicit", "explicit"):
        raise ValueError(f"unknown update order {order!r}")
    if not h > 0:
        raise ValueError("step size must be positive")
    try:
        _, gi, d_before = neighbourhood_gram(s.theta, p.inverse_mode)
        dt = feedback_theta_rate(s.theta, s.phi, p, gi)
        if not _finite(dt):
            raise NumericalBlowupError("non-finite theta rate", step=step)
        theta = s.theta + h * dt
        _, gi_new, d_after = neighbourhood_gram(theta, p.inverse_mode)
    except OffNeighborhoodError as exc:
        raise OffNeighborhoodError(exc.distance, step=step) from None
    if order == "semi_implicit":
        at, gi_at = theta, gi_new
    else:
        at, gi_at = s.theta, gi
    g = _grad(grad_provider, at)
    if not _finite(g):
        raise NumericalBlowupError("non-finite gradient", step=step)
    dp = feedback_phi_rate(at, s.phi, g, p, gi_at)
    if not _finite(dp):
        raise NumericalBlowupError("non-finite phi rate", step=step)
    return State(theta, s.phi + h * dp), d_before, d_after


@dataclass
class Trajectory:
    times: List[float] = dc_field(default_factory=list)
    states: List[State] = dc_field(default_factory=list)
    v_values: List[float] = dc_field(default_factory=list)
    distances: List[float] = dc_field(default_factory=list)

    def record(self, t, s, k):
        self.times.append(t)
        self.states.append(s)
        self.v_values.append(lyapunov_v(s, k))
        self.distances.append(stiefel_distance(s.theta))

    def __len__(self):
        return len(self.times)


def integrate(field, s0, grad_provider, h, t_end, recorder: Optional[Callable] = None,
              stepper=rk4_step, k=LyapunovParams(), stride=1):
    """Step from t=0 to t_end (rounded to a whole number of steps of size h).

    Records (t, state, V, distance) at t=0 and every ``stride`` steps, and
    always at the final step. ``recorder(t, state)`` is called on each record.
    """
    if not (h > 0 and t_end > 0):
        raise ValueError("h and t_end must be positive")
    n_steps = max(1, int(round(t_end / h)))
    traj = Trajectory()
    traj.record(0.0, s0, k)
    if recorder is not None:
        recorder(0.0, s0)
    s = s0
    for i in range(1, n_steps + 1):
        try:
            s = stepper(field, s, grad_provider, h, step=i)
        except FgdError as exc:
            _attach_time(exc, (i - 1) * h)
            raise
        if i % stride == 0 or i == n_steps:
            t = i * h
            traj.record(t, s, k)
            if recorder is not None:
                recorder(t, s)
    return traj


def _attach_time(exc, t):
    exc.time = t
    if exc.args:
        exc.args = (f"{exc.args[0]} [stepping from t={t:.6g}]",) + tuple(exc.args[1:])
