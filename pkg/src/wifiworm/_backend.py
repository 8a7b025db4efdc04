"""Kernel selection.

The compiled extension is used when importable; ``WIFIWORM_BACKEND=python``
forces the pure-Python kernels (``=cython`` makes a missing extension an
error instead of a silent fallback).
"""

import os

from . import _pykernels

_requested = os.environ.get("WIFIWORM_BACKEND", "").strip().lower()

if _requested == "python":
    kernels = _pykernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _pykernels

BACKEND = kernels.BACKEND


def available() -> dict:
    """Map of backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
