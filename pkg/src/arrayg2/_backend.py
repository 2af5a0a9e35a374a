"""Kernel backend selection.

The compiled ``_ckernels`` extension is preferred; the numpy module
``_pykernels`` is used when the extension is not built or when the
environment variable ``ARRAYG2_PURE_PYTHON`` is set to a non-empty value.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

_MODULES = {"cython": "arrayg2._ckernels", "python": "arrayg2._pykernels"}


def load(name: str) -> ModuleType:
    """Import a backend by name (``"cython"`` or ``"python"``)."""
    return importlib.import_module(_MODULES[name])


def available() -> list[str]:
    names = []
    for name in _MODULES:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select() -> tuple[str, ModuleType]:
    if not os.environ.get("ARRAYG2_PURE_PYTHON"):
        try:
            return "cython", load("cython")
        except ImportError:
            pass
    return "python", load("python")


NAME, kernels = _select()
