"""Backend selection for the closed-loop kernel.

The compiled ``_kernel`` extension is used when it imports; otherwise the
pure-Python ``_kernel_py`` takes over.  Setting ``ARXSCHUR_BACKEND=python``
forces the fallback.
"""

import os

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernel_py.closed_loop}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled.closed_loop

_requested = os.environ.get("ARXSCHUR_BACKEND", "").strip().lower()
if _requested and _requested not in _BACKENDS:
    raise ImportError(f"ARXSCHUR_BACKEND={_requested!r} is not available ({sorted(_BACKENDS)})")
BACKEND = _requested or ("cython" if "cython" in _BACKENDS else "python")


def available():
    return sorted(_BACKENDS)


def get(name=None):
    """Kernel function for ``name`` (default: the backend selected at import)."""
    name = BACKEND if name is None else name
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; available: {available()}") from None
