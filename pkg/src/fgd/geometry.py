"""Stiefel-manifold geometry: tangent projection, constraint diagnostics, the
Lyapunov function V(theta, phi) measuring distance from the tangent bundle,
its gradient, and the metric operator L with L grad V giving the feedback.
"""
from dataclasses import dataclass
import numpy as np

from .errors import NotOrthonormalError, OffNeighborhoodError, ShapeError
from .linalg import frobenius_norm, gram, invert_spd, matmul, sym

TOL_MANIFOLD = 1e-8
TOL_TANGENT = 1e-8
INVERSE_MODES = ("exact", "neumann")


@dataclass(frozen=True)
class State:
    """Position ``theta`` (n x p) and velocity ``phi`` of the same shape."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        if np.shape(self.theta) != np.shape(self.phi):
            raise ShapeError(f"State: theta {np.shape(self.theta)} and phi {np.shape(self.phi)} differ")

    def on_bundle(self, tol_manifold=TOL_MANIFOLD, tol_tangent=TOL_TANGENT):
        return stiefel_distance(self.theta) <= tol_manifold and tangency_residual(self) <= tol_tangent

    def is_finite(self):
        return bool(np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.phi)))


@dataclass(frozen=True)
class LyapunovParams:
    k1: float = 1.0
    k2: float = 1.0

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError(f"k1, k2 must be positive, got k1={self.k1}, k2={self.k2}")


def stiefel_distance(theta):
    """||theta^T theta - I||_F."""
    theta = np.asarray(theta, dtype=np.float64)
    return frobenius_norm(gram(theta) - np.eye(theta.shape[1]))


def tangency_residual(s):
    """||Sym(theta^T phi)||_F; zero iff phi is tangent at theta."""
    return frobenius_norm(sym(matmul(s.theta.T, s.phi)))


def _project(x, m):
    return m - matmul(x, sym(matmul(x.T, m)))


def tangent_project(x, m, tol=TOL_MANIFOLD):
    """Project ``m`` onto the tangent space at ``x``: m - x Sym(x^T m)."""
    x = np.asarray(x, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if x.shape != m.shape:
        raise ShapeError(f"tangent_project: shape mismatch {x.shape} vs {m.shape}")
    d = stiefel_distance(x)
    if d > tol:
        raise NotOrthonormalError(f"tangent_project: x is off the manifold (d={d:.3e} > {tol:g})")
    return _project(x, m)


def riemannian_grad(x, euclid_grad, tol=TOL_MANIFOLD):
    return tangent_project(x, euclid_grad, tol)


def neumann_error_bound(d):
    """Upper bound d^2/(1-d) on ||(2I - G) - G^{-1}|| where d = ||G - I|| < 1."""
    return d * d / (1.0 - d)


def gram_inverse_of(g, mode="exact"):
    """Inverse (or first-order Neumann approximation 2I - G) of a Gram matrix."""
    if mode == "neumann":
        return 2.0 * np.eye(g.shape[0]) - g
    if mode == "exact":
        return invert_spd(g)
    raise ValueError(f"inverse mode must be one of {INVERSE_MODES}, got {mode!r}")


def gram_inverse(theta, mode="exact"):
    """(theta^T theta)^{-1}, exactly or as 2I - theta^T theta.

    Raises :class:`OffNeighborhoodError` if ||theta^T theta - I|| >= 1.
    """
    g = gram(np.asarray(theta, dtype=np.float64))
    d = frobenius_norm(g - np.eye(g.shape[0]))
    if not d < 1.0:
        raise OffNeighborhoodError(d)
    return gram_inverse_of(g, mode)


def lyapunov_v(s, k=LyapunovParams()):
    """(k1/4)||theta^T theta - I||^2 + (k2/2)||Sym(theta^T phi)||^2."""
    p = s.theta.shape[1]
    e = gram(s.theta) - np.eye(p)
    t = sym(matmul(s.theta.T, s.phi))
    return 0.25 * k.k1 * frobenius_norm(e) ** 2 + 0.5 * k.k2 * frobenius_norm(t) ** 2


def lyapunov_grad_v(s, k=LyapunovParams()):
    """(grad_theta V, grad_phi V)."""
    p = s.theta.shape[1]
    e = gram(s.theta) - np.eye(p)
    t = sym(matmul(s.theta.T, s.phi))
    g_theta = k.k1 * matmul(s.theta, e) + k.k2 * matmul(s.phi, t)
    g_phi = k.k2 * matmul(s.theta, t)
    return g_theta, g_phi


def metric_l_apply(s, v_theta, v_phi, k=LyapunovParams(), mode="exact"):
    """Apply the 2n x 2n block operator L(theta, phi) to the stacked pair
    (v_theta; v_phi) using only n x p and p x p products."""
    theta, phi = s.theta, s.phi
    gi = gram_inverse(theta, mode)
    gi2 = matmul(gi, gi)
    pt = matmul(theta.T, phi)                 # theta^T phi
    ta = matmul(theta.T, v_theta)
    tb = matmul(theta.T, v_phi)
    u = matmul(gi2, ta - matmul(pt, matmul(gi, tb))) / (4.0 * k.k1)
    top = matmul(theta, u)
    bottom = matmul(theta, -matmul(gi, matmul(pt.T, u)) + matmul(gi2, tb) / (2.0 * k.k2))
    return top, bottom

