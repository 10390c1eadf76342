"""Kernel backend selection.

Two interchangeable implementations of the hot loops exist: a compiled
Cython extension (``driftmv._kernels``) and a pure NumPy fallback
(``driftmv._kernels_py``). They are bitwise equivalent by construction, so
selection only affects speed. The choice is made once at import time:

* ``DRIFTMV_BACKEND=c``  require the extension, fail loudly if missing
* ``DRIFTMV_BACKEND=py`` force the NumPy fallback
* unset / ``auto``       prefer the extension, fall back silently
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

__all__ = ["BACKEND", "branch_stats", "example_branch_stats",
           "available_backends", "load_backend"]


def available_backends() -> tuple[str, ...]:
    return ("c", "py") if _kernels_c is not None else ("py",)


def load_backend(name: str):
    """Return the kernel module for an explicit backend name."""
    if name == "py":
        return _kernels_py
    if name == "c":
        if _kernels_c is None:
            raise RuntimeError(
                "compiled kernel backend requested but the extension is not "
                "built; reinstall the package or set DRIFTMV_BACKEND=py"
            )
        return _kernels_c
    raise ValueError(f"unknown backend {name!r}, expected 'c' or 'py'")


def _select() -> str:
    env = os.environ.get("DRIFTMV_BACKEND", "").strip().lower()
    if env in ("", "auto"):
        return "c" if _kernels_c is not None else "py"
    if env in ("c", "py"):
        load_backend(env)  # validates availability
        return env
    raise ValueError(f"invalid DRIFTMV_BACKEND={env!r}, expected 'c', 'py' or 'auto'")


BACKEND = _select()
_mod = load_backend(BACKEND)

branch_stats = _mod.branch_stats
example_branch_stats = _mod.example_branch_stats
