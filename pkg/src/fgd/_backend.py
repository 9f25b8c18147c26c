"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting
``FGD_PURE_NUMPY=1`` in the environment (before import) forces the pure-numpy
fallback kernels everywhere.
"""
import os

_FLAG = os.environ.get("FGD_PURE_NUMPY", "").strip().lower()
FORCE_NUMPY = _FLAG not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not FORCE_NUMPY
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True)`` if numba is available, else identity."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)
