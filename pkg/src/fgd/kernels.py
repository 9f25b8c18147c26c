"""Inner loops for matrix-core, in two interchangeable flavours.

Each kernel has a ``*_numba`` variant (compiled with :func:`fgd._backend.njit`)
and a ``*_numpy`` variant with identical per-element arithmetic. The public
names at the bottom of the module are bound to one or the other according to
:data:`fgd._backend.USE_NUMBA`. Benchmarks import both variants directly.
"""
import math

import numpy as np

from ._backend import USE_NUMBA, njit


# ---------------------------------------------------------------- matmul
# Every output entry is accumulated as ((0 + a0*b0) + a1*b1) + ..., k ascending.

def _matmul_numpy(a, b):
    m, kdim = a.shape
    out = np.zeros((m, b.shape[1]))
    for k in range(kdim):
        out += np.multiply.outer(a[:, k], b[k, :])
    return out


@njit
def _matmul_numba(a, b):
    m, kdim = a.shape
    ncols = b.shape[1]
    out = np.zeros((m, ncols))
    for i in range(m):
        for k in range(kdim):
            aik = a[i, k]
            for j in range(ncols):
                out[i, j] += aik * b[k, j]
    return out


# ---------------------------------------------------------------- Jacobi

def _rotation(app, aqq, apq):
    tau = (aqq - app) / (2.0 * apq)
    if tau >= 0.0:
        t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
    else:
        t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    return c, t * c


_rotation_numba = njit(_rotation)


@njit
def _offdiag_norm_numba(a):
    n = a.shape[0]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return math.sqrt(acc)


def _offdiag_norm_numpy(a):
    off = a - np.diag(np.diag(a))
    return math.sqrt(float(np.sum(off * off)))


@njit
def _jacobi_numba(a, v, tol_abs, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = _offdiag_norm_numba(a)
        if off <= tol_abs:
            return sweep, off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation_numba(a[p, p], a[q, q], apq)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return max_sweeps, _offdiag_norm_numba(a)


def _jacobi_numpy(a, v, tol_abs, max_sweeps):
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = _offdiag_norm_numpy(a)
        if off <= tol_abs:
            return sweep, off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation(a[p, p], a[q, q], apq)
                akp = a[:, p].copy()
                akq = a[:, q].copy()
                a[:, p] = c * akp - s * akq
                a[:, q] = s * akp + c * akq
                apk = a[p, :].copy()
                aqk = a[q, :].copy()
                a[p, :] = c * apk - s * aqk
                a[q, :] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                vkp = v[:, p].copy()
                vkq = v[:, q].copy()
                v[:, p] = c * vkp - s * vkq
                v[:, q] = s * vkp + c * vkq
    return max_sweeps, _offdiag_norm_numpy(a)


# ---------------------------------------------------------------- Gram-Schmidt
# Modified Gram-Schmidt, two passes per column. Returns False when a column
# collapses below rank_tol relative to its original norm.

@njit
def _mgs_numba(a, rank_tol):
    n, p = a.shape
    for j in range(p):
        orig = 0.0
        for i in range(n):
            orig += a[i, j] * a[i, j]
        orig = math.sqrt(orig)
        for _ in range(2):
            for k in range(j):
                r = 0.0
                for i in range(n):
                    r += a[i, k] * a[i, j]
                for i in range(n):
                    a[i, j] -= r * a[i, k]
        nrm = 0.0
        for i in range(n):
            nrm += a[i, j] * a[i, j]
        nrm = math.sqrt(nrm)
        if orig == 0.0 or nrm <= rank_tol * orig:
            return False
        for i in range(n):
            a[i, j] /= nrm
    return True


def _mgs_numpy(a, rank_tol):
    p = a.shape[1]
    for j in range(p):
        orig = math.sqrt(float(np.dot(a[:, j], a[:, j])))
        for _ in range(2):
            for k in range(j):
                r = np.dot(a[:, k], a[:, j])
                a[:, j] -= r * a[:, k]
        nrm = math.sqrt(float(np.dot(a[:, j], a[:, j])))
        if orig == 0.0 or nrm <= rank_tol * orig:
            return False
        a[:, j] /= nrm
    return True


if USE_NUMBA:
    matmul_kernel = _matmul_numba
    jacobi_kernel = _jacobi_numba
    mgs_kernel = _mgs_numba
else:
    matmul_kernel = _matmul_numpy
    jacobi_kernel = _jacobi_numpy
    mgs_kernel = _mgs_numpy
