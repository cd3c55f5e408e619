"""Kernel backend selection.

Hot kernels (tile assignment, bitmask generation, rasterization) exist twice:
a numba @njit scalar-loop implementation and a vectorized pure-numpy fallback.
The env var TILESPLAT_BACKEND=numpy|numba forces one; unset picks numba when
importable. Within one backend all bit-exactness guarantees hold; across
backends images may differ by a few ulp (different float32 exp
implementations), which the test suite checks with tolerances.
"""

from __future__ import annotations

import os

from .model import ConfigError

_BACKENDS = ("numba", "numpy")
_active: str | None = None


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


def _resolve_default() -> str:
    env = os.environ.get("TILESPLAT_BACKEND", "").strip().lower()
    if env:
        if env not in _BACKENDS:
            raise ConfigError(f"TILESPLAT_BACKEND={env!r}; expected numba or numpy")
        if env == "numba" and not _numba_available():
            raise ConfigError("TILESPLAT_BACKEND=numba but numba is not importable")
        return env
    return "numba" if _numba_available() else "numpy"


def active_backend() -> str:
    global _active
    if _active is None:
        _active = _resolve_default()
    return _active


def set_backend(name: str) -> None:
    """Override the active backend (mainly for tests and benchmarks)."""
    global _active
    name = name.strip().lower()
    if name not in _BACKENDS:
        raise ConfigError(f"unknown backend {name!r}; expected numba or numpy")
    if name == "numba" and not _numba_available():
        raise ConfigError("numba backend requested but numba is not importable")
    _active = name


def kernels():
    """Return the kernel module for the active backend."""
    if active_backend() == "numba":
        from . import _numba_kernels
        return _numba_kernels
    from . import _numpy_kernels
    return _numpy_kernels
