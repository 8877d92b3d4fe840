"""Numba switch.

Hot kernels are written once in a numba-compatible subset of Python/numpy.
Set ``CONTACTRECON_DISABLE_NUMBA=1`` to run them as plain Python instead
(slow; useful for debugging and for benchmarking the compiled path).
"""
import os

_FLAG = os.environ.get("CONTACTRECON_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

NUMBA_AVAILABLE = False
if not NUMBA_DISABLED:
    try:
        import numba

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover
        NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not NUMBA_DISABLED


def kernel(fn):
    """Compile ``fn`` with ``numba.njit`` when enabled, else return it as is."""
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn

