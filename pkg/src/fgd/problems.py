"""Objectives on St(n, p) with independent oracles, plus a tiny MLP."""
from dataclasses import dataclass
import math
from typing import Callable, Tuple

import numpy as np

from . import kernels
from .errors import NotSymmetricError, ShapeError, SingularMatrixError
from .linalg import (as_matrix, frobenius_norm, gram, make_rng, matmul,
                     random_orthonormal, symmetric_eig)


@dataclass(frozen=True)
class Problem:
    name: str
    dims: Tuple[int, int]
    loss_at: Callable[[np.ndarray], float]
    grad_at: Callable[[np.ndarray], np.ndarray]

    def __call__(self, theta):
        """Gradient-provider protocol: theta -> (loss, euclidean gradient)."""
        return self.loss_at(theta), self.grad_at(theta)


# ---------------------------------------------------------------- nearest orthogonal matrix

def nearest_orthogonal_problem(v):
    """f(W) = ||W - V||_F."""
    v = as_matrix(v, "v")
    n, p = v.shape
    if n < p or symmetric_eig(gram(v)).eigenvalues[-1] <= 1e-12:
        raise SingularMatrixError("nearest_orthogonal_problem: V must have full column rank")

    def loss(w):
        return frobenius_norm(w - v)

    def grad(w):
        r = w - v
        nrm = frobenius_norm(r)
        return r / nrm if nrm > 0 else np.zeros_like(r)

    return Problem("nearest_orthogonal", (n, p), loss, grad)


def nearest_orthogonal_closed_form(v):
    """Polar factor W0 = V D Lambda^{-1/2} D^T of V and f0 = ||W0 - V||."""
    v = as_matrix(v, "v")
    dec = symmetric_eig(gram(v))
    if dec.eigenvalues[-1] <= 1e-12:
        raise SingularMatrixError(f"V^T V is singular (min eigenvalue {dec.eigenvalues[-1]:.3e})")
    d = dec.eigenvectors
    w0 = matmul(v, matmul(d / np.sqrt(dec.eigenvalues), d.T))
    return w0, frobenius_norm(w0 - v)


# ---------------------------------------------------------------- Procrustes

def procrustes_problem(a, b):
    """f(W) = 0.5 ||W a - b||^2 for W n x p, a p x m, b n x m."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"procrustes: a {a.shape} and b {b.shape} need the same column count")
    n, p = b.shape[0], a.shape[0]

    def residual(w):
        if w.shape != (n, p):
            raise ShapeError(f"procrustes: W must be {n}x{p}, got {w.shape}")
        return matmul(w, a) - b

    return Problem("procrustes", (n, p),
                   lambda w: 0.5 * frobenius_norm(residual(w)) ** 2,
                   lambda w: matmul(residual(w), a.T))


def planted_procrustes(n, p, m, seed):
    """(problem, W*) with b = W* a for a random orthonormal W*; a is scaled
    by 1/sqrt(m) so that a a^T is close to the identity."""
    w_star = random_orthonormal(n, p, seed)
    a = make_rng(seed, 1).standard_normal((p, m)) / math.sqrt(m)
    return procrustes_problem(a, matmul(w_star, a)), w_star


# ---------------------------------------------------------------- trace minimisation

def trace_min_problem(a, p):
    """f(W) = -tr(W^T A W); minimisers span the top-p eigenspace of A."""
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1] or np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise NotSymmetricError("trace_min_problem: A must be symmetric")
    n = a.shape[0]
    if not 1 <= p <= n:
        raise ShapeError(f"trace_min_problem: need 1 <= p <= n, got p={p}, n={n}")
    return Problem("trace_min", (n, p),
                   lambda w: -float(np.sum(w * matmul(a, w))),
                   lambda w: -2.0 * matmul(a, w))


def random_symmetric_with_gap(n, p, seed, gap=0.1):
    """Random symmetric A whose sorted spectrum has lambda_p - lambda_{p+1} >= gap."""
    rng = make_rng(seed, 2)
    rest = rng.uniform(-1.0, 1.0, size=n - p)
    floor = rest.max() if n > p else 0.0
    lam = np.concatenate([floor + gap + rng.uniform(0.0, 1.0, size=p), rest])
    q = random_orthonormal(n, n, seed)
    a = matmul(q * lam, q.T)
    return 0.5 * (a + a.T)


def top_eigenspace(a, p):
    dec = symmetric_eig(a)
    return dec.eigenvectors[:, :p], dec.eigenvalues


def orthonormal_basis(w):
    q = np.array(w, dtype=np.float64)
    if not kernels.mgs_kernel(q, 1e-12):
        raise SingularMatrixError("rank-deficient basis")
    return q


def principal_angle_distance(u, w):
    """sqrt(sum sin^2 of the principal angles) = ||U U^T - Q Q^T||_F / sqrt 2."""
    qu, qw = orthonormal_basis(u), orthonormal_basis(w)
    return frobenius_norm(matmul(qu, qu.T) - matmul(qw, qw.T)) / math.sqrt(2.0)
