"""Numba toggle.

Hot kernels are written once as plain Python over numpy arrays and wrapped
with :func:`njit` here. Setting ``SCUCB_DISABLE_NUMBA=1`` (or running without
numba installed) leaves them as ordinary Python functions.
"""
import os

_FLAG = os.environ.get("SCUCB_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_ENABLED = numba is not None and not _DISABLED


def njit(fn):
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(fn)
    return fn


def backend_name():
    return "numba" if NUMBA_ENABLED else "python"
