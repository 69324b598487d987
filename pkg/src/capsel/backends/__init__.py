"""Kernel backend selection.

The convolution kernels (forward and input-pullback for strided conv and
non-overlapping transposed conv) dominate runtime. Two interchangeable
implementations exist:

* ``numba``  - ``@njit`` loop kernels, compiled and cached on first use
* ``numpy``  - vectorized gather/scatter kernels backed by BLAS

The active backend is chosen by the ``CAPSEL_BACKEND`` environment variable
(``numba``, ``numpy`` or ``auto``; default ``auto`` = numba when importable,
numpy otherwise). Both backends produce the same results up to float64
summation-order effects; ``benchmarks/bench_backends.py`` compares their speed.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

from ..errors import ConfigurationError

ENV_VAR = "CAPSEL_BACKEND"
_NAMES = ("numba", "numpy")

_active: ModuleType | None = None
_active_name: str | None = None


def _numba_available() -> bool:
    try:
        importlib.import_module("numba")
    except ImportError:
        return False
    return True


def available() -> tuple[str, ...]:
    """Names of the backends importable in this environment."""
    return _NAMES if _numba_available() else ("numpy",)


def load(name: str) -> ModuleType:
    """Import one backend module by name, without changing the active one."""
    if name == "numpy":
        return importlib.import_module("capsel.backends.numpy_backend")
    if name == "numba":
        if not _numba_available():
            raise ConfigurationError("numba backend requested but numba is not installed")
        return importlib.import_module("capsel.backends.numba_backend")
    raise ConfigurationError(f"unknown backend {name!r}; expected one of {_NAMES + ('auto',)}")


def resolve_name(name: str | None = None) -> str:
    """Resolve a backend name from the argument, the environment, or auto."""
    requested = name or os.environ.get(ENV_VAR, "auto").strip().lower()
    if requested == "auto":
        return "numba" if _numba_available() else "numpy"
    if requested not in _NAMES:
        raise ConfigurationError(
            f"unknown backend {requested!r}; expected one of {_NAMES + ('auto',)}"
        )
    return requested


def active() -> ModuleType:
    """The backend module used by the layer primitives (resolved once)."""
    global _active, _active_name
    if _active is None:
        _active_name = resolve_name()
        _active = load(_active_name)
    return _active


def active_name() -> str:
    active()
    assert _active_name is not None
    return _active_name


def set_active(name: str | None) -> str:
    """Force the active backend (``None`` re-resolves from the environment)."""
    global _active, _active_name
    if name is None:
        _active = None
        _active_name = None
        return active_name()
    _active_name = resolve_name(name)
    _active = load(_active_name)
    return _active_name
