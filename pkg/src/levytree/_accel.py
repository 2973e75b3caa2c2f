"""Optional numba acceleration.

Hot kernels are written once as plain Python loops over numpy arrays and
decorated with :func:`njit`.  When numba is missing, or when the environment
variable ``LEVYTREE_DISABLE_NUMBA`` is set to a truthy value, the decorator is
the identity and callers dispatch to the vectorized numpy implementations
instead (see ``USE_NUMBA``).
"""

import os

_FLAG = os.environ.get("LEVYTREE_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    USE_NUMBA = True

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        if func is None:
            return lambda f: _njit(**kwargs)(f)
        return _njit(**kwargs)(func)

except ImportError:
    USE_NUMBA = False

    def njit(func=None, **kwargs):
        if func is None:
            return lambda f: f
        return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
