"""Backend selection for the hot assembly loops.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``RADCONE_BACKEND=python`` to force the fallback.
"""

import os

from radcone import _pykernels

try:
    from radcone import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the selected backend)."""
    if name is None:
        return _impl
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}") from None


_requested = os.environ.get("RADCONE_BACKEND", "").strip().lower()
if _requested and _requested in _BACKENDS:
    BACKEND = _requested
else:
    BACKEND = "cython" if _ckernels is not None else "python"
_impl = _BACKENDS[BACKEND]
