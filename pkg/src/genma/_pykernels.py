"""Pure numpy implementations of the hot kernels.

Used when the compiled core is unavailable or disabled. Shapes and
semantics match ``genma._ckernels`` exactly.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_forward(x, w, b):
    B, m, C = x.shape
    f, kc = w.shape
    k = kc // C
    s = m - k + 1
    y = np.empty((B, s, f))
    y[...] = b
    for i in range(k):
        y += x[:, i:i + s, :] @ w[:, i * C:(i + 1) * C].T
    return y


def conv1d_backward(x, w, gy):
    B, m, C = x.shape
    f, kc = w.shape
    k = kc // C
    s = m - k + 1
    gx = np.zeros_like(x)
    gw = np.zeros_like(w)
    flat_gy = gy.reshape(B * s, f)
    for i in range(k):
        wi = w[:, i * C:(i + 1) * C]
        gx[:, i:i + s, :] += gy @ wi
        gw[:, i * C:(i + 1) * C] += flat_gy.T @ x[:, i:i + s, :].reshape(B * s, C)
    gb = flat_gy.sum(axis=0)
    return gx, gw, gb


def maxpool1d_forward(x, size):
    B, s, f = x.shape
    d = s // size
    win = x[:, :d * size, :].reshape(B, d, size, f)
    # np.argmax returns the first maximum, matching the tie rule
    local = np.argmax(win, axis=2)
    out = np.take_along_axis(win, local[:, :, None, :], axis=2)[:, :, 0, :]
    arg = local + (np.arange(d) * size)[None, :, None]
    return np.ascontiguousarray(out), arg.astype(np.int64)


def maxpool1d_backward(gy, arg, s):
    B, d, f = gy.shape
    gx = np.zeros((B, s, f))
    np.put_along_axis(gx, arg, gy, axis=1)
    return gx


def _objective(indptr, indices, values, y, w, b, lam):
    n = len(y)
    total = 0.0
    for r in range(n):
        lo, hi = indptr[r], indptr[r + 1]
        z = float(np.dot(w[indices[lo:hi]], values[lo:hi])) + b
        total += max(0.0, 1.0 - y[r] * z)
    return 0.5 * lam * (float(np.dot(w, w)) + b * b) + total / n


def pegasos_epoch(indptr, indices, values, y, order, w, b, lam, t, track):
    """One pass of Pegasos over ``order``; updates ``w`` in place.

    The bias is treated as the weight of a constant feature, so it is shrunk
    and regularised together with ``w``.

    Returns (bias, step count, mean objective over the epoch's steps), the
    last being 0.0 unless ``track`` is set.
    """
    obj_sum = 0.0
    for r in order:
        t += 1
        eta = 1.0 / (lam * t)
        lo, hi = indptr[r], indptr[r + 1]
        cols, vals = indices[lo:hi], values[lo:hi]
        margin = y[r] * (float(np.dot(w[cols], vals)) + b)
        w *= 1.0 - eta * lam
        b *= 1.0 - eta * lam
        if margin < 1.0:
            w[cols] += eta * y[r] * vals
            b += eta * y[r]
        if track:
            obj_sum += _objective(indptr, indices, values, y, w, b, lam)
    mean = obj_sum / len(order) if track and len(order) else 0.0
    return b, t, mean
