"""Backend selection for the hot kernels.

The compiled (numba) kernels are used by default.  Setting the environment
variable ``ANISO_CNS_BACKEND=numpy`` before import, or calling
:func:`set_backend` at runtime, switches every kernel to its pure-numpy
twin.  Both produce the same numbers up to round-off.
"""
import os

_VALID = ("numba", "numpy")

try:
    import numba as nb
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None
    HAVE_NUMBA = False

_state = {"name": os.environ.get("ANISO_CNS_BACKEND", "numba").strip().lower() or "numba"}
if _state["name"] not in _VALID:
    raise ValueError(f"ANISO_CNS_BACKEND must be one of {_VALID}, got {_state['name']!r}")
if _state["name"] == "numba" and not HAVE_NUMBA:  # pragma: no cover
    _state["name"] = "numpy"


def get_backend():
    return _state["name"]


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels; returns the previous name."""
    name = name.lower()
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:  # pragma: no cover
        raise RuntimeError("numba is not installed")
    prev = _state["name"]
    _state["name"] = name
    return prev


def use_numba():
    return _state["name"] == "numba"


def njit(*args, **kwd):
    """``numba.njit`` with caching, or the identity when numba is missing."""
    if not HAVE_NUMBA:  # pragma: no cover
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwd.setdefault("cache", True)
    return nb.njit(*args, **kwd)
