"""Kernel backend selection.

The compiled extension (``gmfg._kernels``) is used when it imports; otherwise
the numpy implementations take over. ``GMFG_BACKEND=python`` forces the
fallback, which is handy for benchmarking and for checking the two agree.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

BACKENDS: dict[str, ModuleType] = {"python": _kernels_py}
if _kernels_c is not None:
    BACKENDS["compiled"] = _kernels_c

_active: ModuleType = _kernels_py
if _kernels_c is not None and os.environ.get("GMFG_BACKEND", "").lower() != "python":
    _active = _kernels_c


def backend_name() -> str:
    return "compiled" if _active is _kernels_c else "python"


def use_backend(name: str) -> None:
    """Switch the process-wide backend ("compiled" or "python")."""
    global _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {sorted(BACKENDS)}")
    _active = BACKENDS[name]


def get() -> ModuleType:
    return _active
