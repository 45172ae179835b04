"""Optional numba acceleration for the hot numeric kernels.

Kernels are written once, in nopython-compatible style, and compiled with
``numba.njit`` unless the environment variable ``GRASPBB_PURE_NUMPY`` is set
to a truthy value (or numba is unavailable), in which case the same Python
functions run uninterpreted.  Both paths execute identical arithmetic.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

__all__ = ["NUMBA_ENABLED", "maybe_jit"]


def _numba_wanted() -> bool:
    flag = os.environ.get("GRASPBB_PURE_NUMPY", "").strip().lower()
    return flag in ("", "0", "false", "no")


NUMBA_ENABLED = False
_njit = None

if _numba_wanted():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        _njit = None
        NUMBA_ENABLED = False


def maybe_jit(func):
    """Return an njit-compiled version of ``func``, or ``func`` itself."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    return func
