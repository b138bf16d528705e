"""Numba switch.

Set ``TRANSCO_NUMBA=0`` to force the pure-numpy kernels. When numba is not
importable the flag is ignored and numpy is used.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_FLAG = os.environ.get("TRANSCO_NUMBA", "1").strip().lower()
NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in {"0", "false", "no", "off"}


def njit(func):
    """Compile ``func`` in nopython mode when numba is importable.

    The compiled object is created regardless of ``USE_NUMBA`` so the benchmark
    can compare both paths in one process; dispatch happens in ``kernels``.
    """
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True, nogil=True)(func)
