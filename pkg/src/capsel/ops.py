"""Layer primitives with input-path pullbacks.

Every operation returns ``(y, pullback)`` where the pullback maps a cotangent
with the output's shape to a cotangent with the input's shape. Weights are
constants at initialization, so only the input path is differentiated.

Conventions:
* all gradient work in float64;
* zero padding only;
* transposed conv requires kernel == stride (disjoint output tiles, which
  keeps the adjoint a plain strided correlation);
* leaky-ReLU at exactly 0 uses the negative-branch slope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import backends
from .errors import ConfigurationError, ValidationError
from .tensor import check_finite

__all__ = [
    "ConvSpec",
    "Pullback",
    "conv2d",
    "transposed_conv2d",
    "instance_norm",
    "leaky_relu",
    "concat_channels",
]


@dataclass(frozen=True)
class ConvSpec:
    """Static parameterization of a 2D convolution."""

    in_channels: int
    out_channels: int
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.in_channels <= 0 or self.out_channels <= 0:
            raise ConfigurationError(f"channel counts must be positive: {self}")
        if any(k <= 0 for k in self.kernel) or any(s <= 0 for s in self.stride):
            raise ConfigurationError(f"kernel and stride must be positive: {self}")
        if any(p < 0 for p in self.padding):
            raise ConfigurationError(f"padding must be nonnegative: {self}")

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        ho = (h + 2 * ph - kh) // sh + 1
        wo = (w + 2 * pw - kw) // sw + 1
        if ho < 1 or wo < 1:
            raise ConfigurationError(
                f"conv output collapses to {ho}x{wo} for input {h}x{w} with {self}"
            )
        return ho, wo


@dataclass(frozen=True)
class Pullback:
    """Input-cotangent map of one primitive.

    ``op`` identifies the primitive; ``out_shape`` is checked against the
    incoming cotangent. The saved values live in the closure of ``fn``.
    """

    op: str
    out_shape: tuple[int, ...]
    fn: Callable[[np.ndarray], np.ndarray | tuple[np.ndarray, ...]]

    def __call__(self, g: np.ndarray):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.out_shape:
            raise ValidationError(
                f"{self.op} pullback: cotangent shape {g.shape} != output shape {self.out_shape}"
            )
        return self.fn(g)


def _validate_4d(x: np.ndarray, name: str) -> np.ndarray:
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if x.ndim != 4:
        raise ValidationError(f"{name}: expected a K,C,H,W tensor, got shape {x.shape}")
    return check_finite(x, name)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, spec: ConvSpec):
    """Strided, zero-padded cross-correlation of ``x[K,Cin,H,W]`` with
    ``w[Cout,Cin,kh,kw]`` plus bias. Returns (y[K,Cout,H',W'], pullback)."""
    x = _validate_4d(x, "conv2d input")
    w = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
    b = np.ascontiguousarray(np.asarray(b, dtype=np.float64))
    check_finite(w, "conv2d weight")
    check_finite(b, "conv2d bias")
    kh, kw = spec.kernel
    if w.shape != (spec.out_channels, spec.in_channels, kh, kw):
        raise ConfigurationError(
            f"conv2d weight shape {w.shape} does not match spec {spec}"
        )
    if b.shape != (spec.out_channels,):
        raise ConfigurationError(f"conv2d bias shape {b.shape} != ({spec.out_channels},)")
    if x.shape[1] != spec.in_channels:
        raise ConfigurationError(
            f"conv2d input has {x.shape[1]} channels, spec expects {spec.in_channels}"
        )
    k_n, _, h, wid = x.shape
    ho, wo = spec.out_size(h, wid)
    sh, sw = spec.stride
    ph, pw = spec.padding
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    kern = backends.active()
    y = kern.conv2d_fwd(xp, w, b, sh, sw, ho, wo)
    hp, wp = xp.shape[2], xp.shape[3]

    def vjp(g: np.ndarray) -> np.ndarray:
        gxp = kern.conv2d_input_vjp(np.ascontiguousarray(g), w, sh, sw, hp, wp)
        return gxp[:, :, ph:ph + h, pw:pw + wid]

    return y, Pullback("conv2d", y.shape, vjp)


def transposed_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray,
                      stride: tuple[int, int]):
    """Non-overlapping upsampling: scatter ``x[K,Cin,H,W]`` through
    ``w[Cin,Cout,kh,kw]`` with kernel == stride. Returns
    (y[K,Cout,sh*H,sw*W], pullback)."""
    x = _validate_4d(x, "transposed_conv2d input")
    w = np.ascontiguousarray(np.asarray(w, dtype=np.float64))
    b = np.ascontiguousarray(np.asarray(b, dtype=np.float64))
    check_finite(w, "transposed_conv2d weight")
    check_finite(b, "transposed_conv2d bias")
    if w.ndim != 4:
        raise ConfigurationError(f"transposed_conv2d weight must be 4D, got {w.shape}")
    sh, sw = stride
    if (w.shape[2], w.shape[3]) != (sh, sw):
        raise ConfigurationError(
            f"transposed_conv2d requires kernel == stride, got kernel "
            f"{w.shape[2:]} and stride {(sh, sw)}"
        )
    if x.shape[1] != w.shape[0]:
        raise ConfigurationError(
            f"transposed_conv2d input has {x.shape[1]} channels, weight expects {w.shape[0]}"
        )
    if b.shape != (w.shape[1],):
        raise ConfigurationError(f"transposed_conv2d bias shape {b.shape} != ({w.shape[1]},)")
    kern = backends.active()
    y = kern.tconv2d_fwd(x, w, b)

    def vjp(g: np.ndarray) -> np.ndarray:
        return kern.tconv2d_input_vjp(np.ascontiguousarray(g), w)

    return y, Pullback("transposed_conv2d", y.shape, vjp)


def instance_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5):
    """Per-(sample, channel) plane normalization with affine parameters.

    Uses the biased variance; the pullback differentiates exactly through the
    plane mean and variance. With ``xh`` the normalized plane and ``m = H*W``:

        dz/dx = gamma/sqrt(var+eps) * (g - mean(g) - xh * mean(g*xh))
    """
    if eps <= 0:
        raise ConfigurationError(f"instance_norm eps must be positive, got {eps}")
    x = _validate_4d(x, "instance_norm input")
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ConfigurationError(
            f"instance_norm affine shapes {gamma.shape}, {beta.shape} != ({c},)"
        )
    check_finite(gamma, "instance_norm gamma")
    check_finite(beta, "instance_norm beta")
    mu = x.mean(axis=(2, 3), keepdims=True)
    var = x.var(axis=(2, 3), keepdims=True)
    istd = 1.0 / np.sqrt(var + eps)
    xh = (x - mu) * istd
    y = gamma[None, :, None, None] * xh + beta[None, :, None, None]
    scale = gamma[None, :, None, None] * istd

    def vjp(g: np.ndarray) -> np.ndarray:
        g_mean = g.mean(axis=(2, 3), keepdims=True)
        gxh_mean = (g * xh).mean(axis=(2, 3), keepdims=True)
        return scale * (g - g_mean - xh * gxh_mean)

    return y, Pullback("instance_norm", y.shape, vjp)


def leaky_relu(x: np.ndarray, slope: float = 0.01):
    """Elementwise max(x, slope*x) for 0 <= slope < 1; at exactly 0 the
    pullback takes the negative-branch slope."""
    if not 0.0 <= slope < 1.0:
        raise ConfigurationError(f"leaky_relu slope must be in [0, 1), got {slope}")
    x = np.asarray(x, dtype=np.float64)
    check_finite(x, "leaky_relu input")
    pos = x > 0
    y = np.where(pos, x, slope * x)

    def vjp(g: np.ndarray) -> np.ndarray:
        return np.where(pos, g, slope * g)

    return y, Pullback("leaky_relu", y.shape, vjp)


def concat_channels(a: np.ndarray, b: np.ndarray):
    """Concatenate along the channel axis; the pullback splits the cotangent
    back into ``(g_a, g_b)``."""
    a = _validate_4d(a, "concat_channels lhs")
    b = _validate_4d(b, "concat_channels rhs")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ConfigurationError(
            f"concat_channels needs matching batch and spatial dims, got {a.shape} and {b.shape}"
        )
    ca = a.shape[1]
    y = np.concatenate([a, b], axis=1)

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g[:, :ca], g[:, ca:]

    return y, Pullback("concat_channels", y.shape, vjp)
