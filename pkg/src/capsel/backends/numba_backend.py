"""Numba loop kernels for the convolution primitives.

Same contracts as ``numpy_backend``. Accumulation runs in a fixed order per
output element, so results are deterministic under threading; fastmath stays
off to keep the adjoint identity at 1e-12.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(cache=True, parallel=True)
def conv2d_fwd(xp, w, b, sh, sw, ho, wo):
    k_n, cin = xp.shape[0], xp.shape[1]
    cout, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    y = np.empty((k_n, cout, ho, wo), dtype=np.float64)
    for ko in prange(k_n * cout):
        k = ko // cout
        o = ko % cout
        for i in range(ho):
            for j in range(wo):
                acc = b[o]
                for c in range(cin):
                    for u in range(kh):
                        for v in range(kw):
                            acc += w[o, c, u, v] * xp[k, c, i * sh + u, j * sw + v]
                y[k, o, i, j] = acc
    return y


@njit(cache=True, parallel=True)
def conv2d_input_vjp(gy, w, sh, sw, hp, wp):
    # gather form: each padded-input cell sums the kernel taps that touched
    # it, so every cell has a single writer and a fixed accumulation order
    k_n, cout, ho, wo = gy.shape
    cin, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    gxp = np.zeros((k_n, cin, hp, wp), dtype=np.float64)
    for kc in prange(k_n * cin):
        k = kc // cin
        c = kc % cin
        for ip in range(hp):
            for jp in range(wp):
                acc = 0.0
                for u in range(kh):
                    r = ip - u
                    if r < 0 or r % sh != 0:
                        continue
                    i = r // sh
                    if i >= ho:
                        continue
                    for v in range(kw):
                        s = jp - v
                        if s < 0 or s % sw != 0:
                            continue
                        j = s // sw
                        if j >= wo:
                            continue
                        for o in range(cout):
                            acc += gy[k, o, i, j] * w[o, c, u, v]
                gxp[k, c, ip, jp] = acc
    return gxp


@njit(cache=True, parallel=True)
def tconv2d_fwd(x, w, b):
    k_n, cin, h, wid = x.shape
    cout, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    y = np.empty((k_n, cout, h * kh, wid * kw), dtype=np.float64)
    for ko in prange(k_n * cout):
        k = ko // cout
        o = ko % cout
        for i in range(h):
            for j in range(wid):
                for u in range(kh):
                    for v in range(kw):
                        acc = b[o]
                        for c in range(cin):
                            acc += x[k, c, i, j] * w[c, o, u, v]
                        y[k, o, i * kh + u, j * kw + v] = acc
    return y


@njit(cache=True, parallel=True)
def tconv2d_input_vjp(gy, w):
    k_n, cout = gy.shape[0], gy.shape[1]
    cin, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    h, wid = gy.shape[2] // kh, gy.shape[3] // kw
    gx = np.empty((k_n, cin, h, wid), dtype=np.float64)
    for kc in prange(k_n * cin):
        k = kc // cin
        c = kc % cin
        for i in range(h):
            for j in range(wid):
                acc = 0.0
                for o in range(cout):
                    for u in range(kh):
                        for v in range(kw):
                            acc += gy[k, o, i * kh + u, j * kw + v] * w[c, o, u, v]
                gx[k, c, i, j] = acc
    return gx
