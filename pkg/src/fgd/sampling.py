"""Seeded random states for property checks and experiments."""
import numpy as np

from .geometry import LyapunovParams, State, lyapunov_v, stiefel_distance, _project
from .linalg import frobenius_norm, make_rng, random_orthonormal, sym


def random_state_in_s(rng, n, p, d_max=0.9, phi_scale=1.0):
    """A state with 0 < ||theta^T theta - I|| < d_max and a generic phi."""
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    while True:
        a = rng.standard_normal((n, p))
        a *= rng.uniform(0.0, 0.5 * d_max) / np.linalg.norm(a)
        theta = q + a
        if 0.0 < stiefel_distance(theta) < d_max:
            break
    phi = phi_scale * rng.standard_normal((n, p))
    return State(theta, phi)


def on_bundle_state(n, p, seed, phi_scale=1.0):
    """theta in St(n, p) and phi tangent at theta."""
    theta = random_orthonormal(n, p, seed)
    phi = _project(theta, make_rng(seed, 21).standard_normal((n, p)))
    return State(theta, phi_scale * phi / np.linalg.norm(phi))


def perturbed_state(n, p, seed, v_target, k=LyapunovParams(), phi_scale=1.0):
    """An on-bundle state pushed off along a random direction until V = v_target."""
    base = on_bundle_state(n, p, seed, phi_scale)
    rng = make_rng(seed, 22)
    da = rng.standard_normal((n, p))
    db = rng.standard_normal((n, p))

    def at(eps):
        return State(base.theta + eps * da, base.phi + eps * db)

    eps = 1e-3
    for _ in range(60):
        v = lyapunov_v(at(eps), k)
        if abs(v / v_target - 1.0) < 1e-12:
            break
        eps *= np.sqrt(v_target / v)
    return at(eps)


def random_gram(rng, p, d):
    """Symmetric positive definite G with ||G - I||_F = d (d < 1)."""
    e = sym(rng.standard_normal((p, p)))
    return np.eye(p) + d * e / frobenius_norm(e)
