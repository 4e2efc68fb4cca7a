"""JIT switch.

Kernels are written in plain scalar-loop Python so they run unchanged when
numba is absent or disabled. Set ``FIBERQED_NO_NUMBA=1`` to force the
fallback path (grid evaluations then use vectorised numpy instead).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("FIBERQED_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

USE_NUMBA = numba is not None and not _DISABLED


def njit(fn=None, **options):
    """``numba.njit(cache=True, nogil=True)`` or the identity decorator."""

    def wrap(f):
        if not USE_NUMBA:
            f.py_func = f
            return f
        opts = {"cache": True, "nogil": True}
        opts.update(options)
        return numba.njit(**opts)(f)

    if fn is not None:
        return wrap(fn)
    return wrap
