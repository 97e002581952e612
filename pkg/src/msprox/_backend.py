"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when importable; otherwise the
NumPy ``_pykernels`` mirror.  ``MSPROX_BACKEND`` overrides the choice:
``python`` forces the fallback, ``cython`` makes a missing extension an error.
"""

import importlib
import os

from . import _pykernels

_choice = os.environ.get("MSPROX_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "python", "cython"):
    raise ImportError(f"MSPROX_BACKEND must be auto, python or cython, got {_choice!r}")

if _choice == "python":
    kernels = _pykernels
else:
    try:
        kernels = importlib.import_module("msprox._ckernels")
    except ImportError:
        if _choice == "cython":
            raise
        kernels = _pykernels

BACKEND = kernels.NAME


def available():
    """Mapping of backend name to kernel module for every importable backend."""
    out = {_pykernels.NAME: _pykernels}
    try:
        mod = importlib.import_module("msprox._ckernels")
    except ImportError:
        pass
    else:
        out[mod.NAME] = mod
    return out
