"""Optional numba acceleration.

Kernels in :mod:`farmakit._kernels` exist in two flavours: an explicit-loop
version compiled with ``numba.njit`` and a vectorised numpy version. The
compiled one is used when numba imports and ``FARMAKIT_DISABLE_NUMBA`` is not
set to a truthy value.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional extra
    numba = None

_TRUTHY = {"1", "true", "yes", "on"}

NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and (
    os.environ.get("FARMAKIT_DISABLE_NUMBA", "").strip().lower() not in _TRUTHY
)


def njit(fn):
    """Compile ``fn`` with numba when it is installed, else return it unchanged."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def max_threads(default=None):
    """Thread cap for internally parallel work (``FARMAKIT_THREADS``)."""
    raw = os.environ.get("FARMAKIT_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"FARMAKIT_THREADS must be an integer, got {raw!r}") from None
        return max(1, value)
    if default is not None:
        return default
    return os.cpu_count() or 1
