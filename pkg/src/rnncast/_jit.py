"""Numba switch for the hot kernels.

Set ``RNNCAST_DISABLE_NUMBA=1`` to run every kernel as plain numpy. The flag
is read once at import time. Kernels keep the undecorated function on
``.py_func`` in both modes so the two paths can be compared in-process.
"""
import os

_FLAG = os.environ.get("RNNCAST_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    fn.py_func = fn
    return fn
