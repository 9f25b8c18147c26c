"""Dense real-matrix algebra on float64 numpy arrays.

Matrices are plain 2-D ``np.ndarray`` objects of dtype float64. The products
here go through a fixed-summation-order kernel so results are reproducible to
the bit; :func:`symmetric_eig` is a cyclic Jacobi solver used as an
independent oracle (and as the exact-inverse path).
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .errors import (ConvergenceError, NonFiniteError, NotSymmetricError,
                     ShapeError, SingularMatrixError)

SYMMETRY_TOL = 1e-12
DEFAULT_EIG_TOL = 1e-14
MAX_SWEEPS = 100


def as_matrix(a, name="matrix"):
    """Validate user input and return a C-contiguous float64 2-D copy."""
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return np.ascontiguousarray(m)


def _check_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _check_square(a, op):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"{op}: expected a square matrix, got shape {a.shape}")


def matmul(a, b):
    """Matrix product with k-ascending accumulation for every entry."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return kernels.matmul_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b))


def gram(a):
    """a^T a."""
    return matmul(a.T, a)


def frobenius_inner(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "frobenius_inner")
    return float(np.sum(a * b))


def frobenius_norm(a):
    return math.sqrt(frobenius_inner(a, a))


def sym(a):
    """(a + a^T)/2. Exactly symmetric: IEEE addition commutes, so entry (i, j)
    and entry (j, i) are the same floating-point sum."""
    a = np.asarray(a, dtype=np.float64)
    _check_square(a, "sym")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # columns, orthonormal
    sweeps: int = 0


def _sign_fix(vecs):
    # largest-magnitude entry of each column positive; argmax returns the first on ties
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[idx, np.arange(vecs.shape[1])] < 0.0, -1.0, 1.0)
    return vecs * signs


def symmetric_eig(s, tol=DEFAULT_EIG_TOL, max_sweeps=MAX_SWEEPS):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm is at most
    ``tol * ||s||``. Raises :class:`ConvergenceError` after ``max_sweeps``.
    """
    s = as_matrix(s, "s")
    _check_square(s, "symmetric_eig")
    if tol <= 0:
        raise ValueError("tol must be positive")
    asym = np.max(np.abs(s - s.T))
    if asym > SYMMETRY_TOL * max(1.0, np.max(np.abs(s))):
        raise NotSymmetricError(f"symmetric_eig: input asymmetric by {asym:.3e}")
    a = sym(s)
    n = a.shape[0]
    v = np.eye(n)
    scale = frobenius_norm(a)
    sweeps, off = kernels.jacobi_kernel(a, v, tol * scale, max_sweeps)
    if off > tol * scale:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps", off)
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return EigDecomposition(vals[order], _sign_fix(v[:, order]), int(sweeps))


def invert_spd(s, eig_floor=1e-12):
    """Exact inverse Q diag(1/lambda) Q^T of a symmetric positive-definite matrix."""
    dec = symmetric_eig(s)
    if dec.eigenvalues[-1] <= eig_floor:
        raise SingularMatrixError(
            f"invert_spd: smallest eigenvalue {dec.eigenvalues[-1]:.3e} <= {eig_floor:g}")
    q = dec.eigenvectors
    return sym(matmul(q / dec.eigenvalues, q.T))


def make_rng(seed, *stream):
    """Philox (counter-based, 64-bit) generator keyed by ``seed`` and an optional stream path."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def random_orthonormal(n, p, seed, max_retries=5):
    """Seeded n x p matrix with orthonormal columns (Gram-Schmidt of a Gaussian draw)."""
    if n < p or p < 1:
        raise ShapeError(f"random_orthonormal: need n >= p >= 1, got n={n}, p={p}")
    for attempt in range(max_retries + 1):
        a = make_rng(seed, attempt).standard_normal((n, p))
        if kernels.mgs_kernel(a, 1e-8):
            return a
    raise SingularMatrixError(f"random_orthonormal: rank-deficient draws for seed {seed}")


def orthonormality_error(theta):
    theta = np.asarray(theta, dtype=np.float64)
    return frobenius_norm(gram(theta) - np.eye(theta.shape[1]))
