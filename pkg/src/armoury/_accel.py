"""Numba switch.

Set ``ARMOURY_DISABLE_NUMBA=1`` to force the pure-numpy kernels (useful for
debugging and for the benchmark's baseline column).
"""

import os

_disabled = os.environ.get("ARMOURY_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _disabled


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    if HAS_NUMBA:
        import numba

        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap
