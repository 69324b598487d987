"""Pure-numpy convolution kernels.

Forward gathers strided patches and contracts them with the kernel via
``tensordot`` (BLAS); the input-pullback applies the exact adjoint of that
gather/contract, i.e. it expands the cotangent and scatter-adds it back onto
the padded input grid.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def conv2d_fwd(xp: np.ndarray, w: np.ndarray, b: np.ndarray,
               sh: int, sw: int, ho: int, wo: int) -> np.ndarray:
    """Correlate padded input ``xp[K,Cin,Hp,Wp]`` with ``w[Cout,Cin,kh,kw]``."""
    k_n, cin, _, _ = xp.shape
    kh, kw = w.shape[2], w.shape[3]
    cols = np.empty((k_n, cin, kh, kw, ho, wo), dtype=xp.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xp[:, :, u:u + sh * ho:sh, v:v + sw * wo:sw]
    # (K,ho,wo,Cout) <- contract over (Cin,kh,kw)
    y = np.tensordot(cols, w, axes=([1, 2, 3], [1, 2, 3]))
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2)) + b[None, :, None, None]


def conv2d_input_vjp(gy: np.ndarray, w: np.ndarray,
                     sh: int, sw: int, hp: int, wp: int) -> np.ndarray:
    """Adjoint of ``conv2d_fwd`` w.r.t. the padded input; returns [K,Cin,hp,wp]."""
    k_n, _, ho, wo = gy.shape
    cin, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    # (K,ho,wo,Cin,kh,kw) <- contract over Cout
    gcols = np.tensordot(gy.transpose(0, 2, 3, 1), w, axes=([3], [0]))
    gxp = np.zeros((k_n, cin, hp, wp), dtype=gy.dtype)
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u:u + sh * ho:sh, v:v + sw * wo:sw] += \
                gcols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
    return gxp


def tconv2d_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Transposed conv with kernel == stride: each input cell paints one
    disjoint (kh,kw) output tile, so the output is a block interleave."""
    k_n, _, h, wid = x.shape
    cout, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    t = np.tensordot(x, w, axes=([1], [0]))          # (K,H,W,Cout,kh,kw)
    y = t.transpose(0, 3, 1, 4, 2, 5).reshape(k_n, cout, h * kh, wid * kw)
    return np.ascontiguousarray(y) + b[None, :, None, None]


def tconv2d_input_vjp(gy: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Adjoint of ``tconv2d_fwd``: a stride-(kh,kw) correlation of the
    cotangent with the same kernel."""
    k_n, cout, hy, wy = gy.shape
    cin, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    h, wid = hy // kh, wy // kw
    blocks = gy.reshape(k_n, cout, h, kh, wid, kw)    # (K,Cout,H,kh,W,kw)
    return np.einsum("kohuwv,couv->kchw", blocks, w, optimize=True)
