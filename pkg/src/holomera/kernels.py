"""Backend selection for the trajectory kernel.

The compiled extension is the default when importable. Set
``HOLOMERA_KERNEL=python`` to make the numpy fallback the default.
"""
from __future__ import annotations

import os

from . import _kernels_py
from ._kernels_py import DEPOL1, DEPOL2, MEASURE, RESET, U1, U2, uniform_scalar, uniforms  # noqa: F401

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None

HAVE_EXTENSION = _compiled is not None
_forced = os.environ.get("HOLOMERA_KERNEL", "").lower()
BACKEND = "python" if _forced == "python" or not HAVE_EXTENSION else "cython"


def get_backend(name: str | None = None):
    """Kernel module for ``name`` ('cython', 'python' or None for the default)."""
    name = name or BACKEND
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available; rebuild the package")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def run_trajectories(*args, backend: str | None = None, **kwargs):
    return get_backend(backend).run_trajectories(*args, **kwargs)
