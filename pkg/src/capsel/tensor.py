"""Dense tensor helpers.

Tensors are plain ``numpy.ndarray`` values in row-major order, float64 on
every gradient-carrying path. Public operations validate finiteness at their
boundaries; internals assume validated inputs.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ValidationError

__all__ = ["as_tensor", "check_finite", "require_shape"]


def as_tensor(data, shape: Sequence[int] | None = None, name: str = "tensor") -> np.ndarray:
    """Build a float64 tensor from nested or flat data.

    When ``shape`` is given, ``data`` is treated as a flat sequence and must
    contain exactly ``prod(shape)`` values. NaN and Inf are rejected.
    """
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in shape):
            raise ValidationError(f"{name}: extents must be positive, got {shape}")
        flat = arr.reshape(-1)
        expected = int(np.prod(shape))
        if flat.size != expected:
            raise ValidationError(
                f"{name}: {flat.size} values cannot fill shape {shape} ({expected} slots)"
            )
        arr = flat.reshape(shape)
    arr = np.ascontiguousarray(arr)
    check_finite(arr, name)
    return arr


def check_finite(arr: np.ndarray, name: str = "tensor") -> np.ndarray:
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name}: contains NaN or Inf")
    return arr


def require_shape(arr: np.ndarray, shape: tuple[int, ...], name: str = "tensor") -> np.ndarray:
    if arr.shape != shape:
        raise ValidationError(f"{name}: expected shape {shape}, got {arr.shape}")
    return arr
