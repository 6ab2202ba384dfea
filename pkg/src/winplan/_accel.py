"""Backend selection for the hot kernels.

The numba path is used when numba imports and ``WINPLAN_BACKEND`` is not set
to ``numpy``. Both paths return identical integer counts.
"""

import os

try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False

_VALID = ("numba", "numpy")
_backend = None


def _default_backend():
    env = os.environ.get("WINPLAN_BACKEND", "").strip().lower()
    if env == "numpy" or not HAVE_NUMBA:
        return "numpy"
    if env and env not in _VALID:
        raise ValueError(f"WINPLAN_BACKEND must be one of {_VALID}, got {env!r}")
    return "numba"


def get_backend():
    global _backend
    if _backend is None:
        _backend = _default_backend()
    return _backend


def set_backend(name):
    """Force a backend for the rest of the process (used by tests and benchmarks)."""
    global _backend
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
