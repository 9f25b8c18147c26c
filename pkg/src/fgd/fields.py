"""Continuous-time vector fields for momentum gradient descent on St(n, p).

``field_tangent_bundle`` is the system on the tangent bundle itself.
``field_extended_x`` extends it to the neighbourhood ||theta^T theta - I|| < 1
so that V is conserved, and ``field_feedback_full`` subtracts the feedback
term, after which V decays as exp(-alpha t).

All fields take the Euclidean loss gradient at ``s.theta`` as an input and
return a ``(d_theta, d_phi)`` pair.
"""
from dataclasses import dataclass

import numpy as np

from .errors import OffBundleError, OffNeighborhoodError, ShapeError
from .geometry import (INVERSE_MODES, State, gram_inverse_of, stiefel_distance,
                       tangency_residual)
from .linalg import frobenius_norm, gram, matmul, sym

OFF_BUNDLE_TOL = 1e-3


@dataclass(frozen=True)
class FieldParams:
    eta: float
    gamma: float = 0.0
    alpha: float = 1.0
    inverse_mode: str = "exact"

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        # alpha = 0 switches the feedback off (control runs)
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if self.inverse_mode not in INVERSE_MODES:
            raise ValueError(f"inverse_mode must be one of {INVERSE_MODES}")


def _check_grad(s, euclid_grad):
    if np.shape(euclid_grad) != s.theta.shape:
        raise ShapeError(f"gradient shape {np.shape(euclid_grad)} does not match theta {s.theta.shape}")


def drift_d(s, euclid_grad, p):
    """D = -gamma phi - grad L(theta)."""
    _check_grad(s, euclid_grad)
    return -p.gamma * s.phi - euclid_grad


def euclidean_momentum_field(s, euclid_grad, p):
    """Unconstrained momentum descent: (phi, (-gamma phi - grad)/eta)."""
    return s.phi, drift_d(s, euclid_grad, p) / p.eta


def field_tangent_bundle(s, euclid_grad, p, tol=OFF_BUNDLE_TOL):
    d = drift_d(s, euclid_grad, p)
    dist, tres = stiefel_distance(s.theta), tangency_residual(s)
    if dist > tol or tres > tol:
        raise OffBundleError(f"field_tangent_bundle needs an (approximately) on-bundle state; "
                             f"d={dist:.3e}, tangency={tres:.3e} (tol {tol:g})")
    theta, phi = s.theta, s.phi
    dphi = -matmul(theta, gram(phi)) + (d - matmul(theta, sym(matmul(theta.T, d)))) / p.eta
    return phi.copy(), dphi


def _x_theta(theta, phi, gi):
    return phi - matmul(theta, matmul(gi, sym(matmul(theta.T, phi))))


def _x_phi(theta, phi, d, gi, eta):
    tp = matmul(theta.T, phi)
    inner = matmul(gi, matmul(tp, sym(tp))) - gram(phi)
    return matmul(theta, matmul(gi, inner)) + (d - matmul(theta, matmul(gi, sym(matmul(theta.T, d))))) / eta


def _fb_theta(theta, gi, alpha):
    return (0.25 * alpha) * matmul(theta, np.eye(gi.shape[0]) - gi)


def _fb_phi(theta, phi, gi, alpha):
    tp = matmul(theta.T, phi)
    return (0.25 * alpha) * matmul(theta, matmul(gi, matmul(tp.T, gi) + tp))


def field_extended_x(s, euclid_grad, p):
    """The extension X(theta, phi); conserves V wherever it is defined."""
    d = drift_d(s, euclid_grad, p)
    gi = neighbourhood_gram(s.theta, p.inverse_mode)[1]
    return _x_theta(s.theta, s.phi, gi), _x_phi(s.theta, s.phi, d, gi, p.eta)


def feedback_term(s, p):
    """The pair subtracted from X; equals alpha * L grad V (exact inverse)."""
    gi = neighbourhood_gram(s.theta, p.inverse_mode)[1]
    return _fb_theta(s.theta, gi, p.alpha), _fb_phi(s.theta, s.phi, gi, p.alpha)


def field_feedback_full(s, euclid_grad, p):
    """X - feedback; along its flow dV/dt = -alpha V."""
    d = drift_d(s, euclid_grad, p)
    gi = neighbourhood_gram(s.theta, p.inverse_mode)[1]
    dtheta = _x_theta(s.theta, s.phi, gi) - _fb_theta(s.theta, gi, p.alpha)
    dphi = _x_phi(s.theta, s.phi, d, gi, p.eta) - _fb_phi(s.theta, s.phi, gi, p.alpha)
    return dtheta, dphi


def neighbourhood_gram(theta, mode):
    """(G, G^{-1}, d) for G = theta^T theta; raises if d = ||G - I|| >= 1."""
    g = gram(theta)
    dist = frobenius_norm(g - np.eye(g.shape[0]))
    if not dist < 1.0:
        raise OffNeighborhoodError(dist)
    return g, gram_inverse_of(g, mode), dist


# The two rates below are algebraically equal to the components of
# field_feedback_full but regroup the products so every n x p multiply
# happens once: theta-rate = phi - theta [Gi S + (alpha/4)(I - Gi)] and
# phi-rate = D/eta + theta Gi M with M collecting all p x p terms.

def feedback_theta_rate(theta, phi, p, gi=None):
    """theta-component of the full feedback field (needs no gradient)."""
    if gi is None:
        gi = neighbourhood_gram(theta, p.inverse_mode)[1]
    k = gi.shape[0]
    inner = matmul(gi, sym(matmul(theta.T, phi))) + (0.25 * p.alpha) * (np.eye(k) - gi)
    return phi - matmul(theta, inner)


def feedback_phi_rate(theta, phi, euclid_grad, p, gi=None):
    """phi-component of the full feedback field."""
    if np.shape(euclid_grad) != theta.shape:
        raise ShapeError(f"gradient shape {np.shape(euclid_grad)} does not match theta {theta.shape}")
    if gi is None:
        gi = neighbourhood_gram(theta, p.inverse_mode)[1]
    d = -p.gamma * phi - euclid_grad
    tp = matmul(theta.T, phi)
    td = -p.gamma * tp - matmul(theta.T, euclid_grad)
    gtp = matmul(gi, tp)
    m = (matmul(gtp, sym(tp)) - gram(phi) - sym(td) / p.eta
         - (0.25 * p.alpha) * (matmul(tp.T, gi) + tp))
    return d / p.eta + matmul(theta, matmul(gi, m))
