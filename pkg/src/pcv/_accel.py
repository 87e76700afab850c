"""Backend selection for the hot kernels.

Set ``PCV_NUMBA=0`` in the environment to force the pure-numpy path.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

USE_NUMBA = numba is not None and os.environ.get("PCV_NUMBA", "1") not in ("0", "false", "no")


def njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
