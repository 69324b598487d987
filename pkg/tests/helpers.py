"""Test-side reference implementations, independent of the package kernels."""

import numpy as np
from scipy.signal import correlate2d


def conv2d_reference(x, w, b, stride, padding):
    """Strided, zero-padded correlation via scipy, one (k, o) pair at a time."""
    sh, sw = stride
    ph, pw = padding
    k_n, cin, _, _ = x.shape
    cout = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    planes = []
    for k in range(k_n):
        rows = []
        for o in range(cout):
            acc = np.zeros((xp.shape[2] - w.shape[2] + 1, xp.shape[3] - w.shape[3] + 1))
            for c in range(cin):
                acc += correlate2d(xp[k, c], w[o, c], mode="valid")
            rows.append(acc[::sh, ::sw] + b[o])
        planes.append(rows)
    return np.asarray(planes)


def tconv2d_reference(x, w, b):
    """Kernel==stride upsampling by explicit per-cell tile painting."""
    k_n, cin, h, wid = x.shape
    cout, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    y = np.zeros((k_n, cout, h * kh, wid * kw))
    for k in range(k_n):
        for o in range(cout):
            for i in range(h):
                for j in range(wid):
                    tile = sum(x[k, c, i, j] * w[c, o] for c in range(cin))
                    y[k, o, i * kh:(i + 1) * kh, j * kw:(j + 1) * kw] = tile + b[o]
    return y


def instance_norm_jvp(x, gamma, eps, v):
    """Directional derivative of instance norm at x along v, from scratch.

    Per (k, c) plane with m = H*W, istd = 1/sqrt(var + eps):
      dy = gamma * istd * (v - mean(v) - xhat * mean(xhat * v))
    The plane Jacobian is symmetric, so this matches the pullback's formula
    with the cotangent swapped in; stats here are recomputed independently.
    """
    mu = x.mean(axis=(2, 3), keepdims=True)
    var = np.square(x - mu).mean(axis=(2, 3), keepdims=True)
    istd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * istd
    v_mean = v.mean(axis=(2, 3), keepdims=True)
    proj = (xhat * v).mean(axis=(2, 3), keepdims=True)
    return gamma[None, :, None, None] * istd * (v - v_mean - xhat * proj)


def rel_err(a, b, floor=1e-10):
    return abs(a - b) / max(abs(a), abs(b), floor)
