# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: 1-D convolution, max pooling, and the Pegasos pass.

Convolution is written as k shifted GEMMs against strided views of the input,
so no window (im2col) buffer is ever materialised. All loops run in a fixed
order, so results are bit-reproducible for a given build.
"""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


def conv1d_forward(double[:, :, ::1] x, double[:, ::1] w, double[::1] b):
    cdef int B = x.shape[0], m = x.shape[1], C = x.shape[2]
    cdef int f = w.shape[0], kc = w.shape[1]
    cdef int k = kc // C
    cdef int s = m - k + 1
    cdef int bi, j, o, i
    cdef double one = 1.0
    cdef char tr = b'T', nt = b'N'
    out = np.empty((B, s, f))
    cdef double[:, :, ::1] y = out
    with nogil:
        for bi in range(B):
            for j in range(s):
                for o in range(f):
                    y[bi, j, o] = b[o]
            for i in range(k):
                # y_b (s x f) += x_b[i:i+s] (s x C) . w_i^T
                dgemm(&tr, &nt, &f, &s, &C, &one, &w[0, i * C], &kc,
                      &x[bi, i, 0], &C, &one, &y[bi, 0, 0], &f)
    return out


def conv1d_backward(double[:, :, ::1] x, double[:, ::1] w, double[:, :, ::1] gy):
    cdef int B = x.shape[0], m = x.shape[1], C = x.shape[2]
    cdef int f = w.shape[0], kc = w.shape[1]
    cdef int k = kc // C
    cdef int s = m - k + 1
    cdef int bi, j, o, i
    cdef double one = 1.0
    cdef char tr = b'T', nt = b'N'
    gx_arr = np.zeros((B, m, C))
    gw_arr = np.zeros((f, kc))
    gb_arr = np.zeros(f)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    with nogil:
        for bi in range(B):
            for i in range(k):
                # gx_b[i:i+s] (s x C) += gy_b (s x f) . w_i (f x C)
                dgemm(&nt, &nt, &C, &s, &f, &one, &w[0, i * C], &kc,
                      &gy[bi, 0, 0], &f, &one, &gx[bi, i, 0], &C)
                # gw_i (f x C) += gy_b^T (f x s) . x_b[i:i+s] (s x C)
                dgemm(&nt, &tr, &C, &f, &s, &one, &x[bi, i, 0], &C,
                      &gy[bi, 0, 0], &f, &one, &gw[0, i * C], &kc)
            for j in range(s):
                for o in range(f):
                    gb[o] += gy[bi, j, o]
    return gx_arr, gw_arr, gb_arr


def maxpool1d_forward(double[:, :, ::1] x, int size):
    cdef Py_ssize_t B = x.shape[0], s = x.shape[1], f = x.shape[2]
    cdef Py_ssize_t d = s // size
    cdef Py_ssize_t bi, p, o, q, best
    cdef double v, top
    out_arr = np.empty((B, d, f))
    arg_arr = np.empty((B, d, f), dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, ::1] arg = arg_arr
    with nogil:
        for bi in range(B):
            for p in range(d):
                for o in range(f):
                    best = p * size
                    top = x[bi, best, o]
                    for q in range(p * size + 1, p * size + size):
                        v = x[bi, q, o]
                        # strict comparison keeps the first maximum on ties
                        if v > top:
                            top = v
                            best = q
                    out[bi, p, o] = top
                    arg[bi, p, o] = best
    return out_arr, arg_arr


def maxpool1d_backward(double[:, :, ::1] gy, cnp.int64_t[:, :, ::1] arg, Py_ssize_t s):
    cdef Py_ssize_t B = gy.shape[0], d = gy.shape[1], f = gy.shape[2]
    cdef Py_ssize_t bi, p, o
    gx_arr = np.zeros((B, s, f))
    cdef double[:, :, ::1] gx = gx_arr
    with nogil:
        for bi in range(B):
            for p in range(d):
                for o in range(f):
                    gx[bi, arg[bi, p, o], o] += gy[bi, p, o]
    return gx_arr


cdef double _objective(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                       const double[::1] values, const double[::1] y,
                       double[::1] w, double wscale, double b, double lam) noexcept nogil:
    cdef Py_ssize_t n = y.shape[0], r, q
    cdef double total = 0.0, z, sq = 0.0, hinge
    for r in range(n):
        z = 0.0
        for q in range(indptr[r], indptr[r + 1]):
            z += w[indices[q]] * values[q]
        hinge = 1.0 - y[r] * (wscale * z + b)
        if hinge > 0.0:
            total += hinge
    for q in range(w.shape[0]):
        sq += w[q] * w[q]
    return 0.5 * lam * (wscale * wscale * sq + b * b) + total / n


def pegasos_epoch(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                  const double[::1] values, const double[::1] y,
                  const cnp.int64_t[::1] order, double[::1] w, double b,
                  double lam, long t, bint track):
    """One Pegasos pass; ``w`` is updated in place.

    The shrink step is applied lazily through a running scale factor so each
    update costs O(nnz of the row) instead of O(dimension). The bias acts as
    the weight of a constant feature and is shrunk along with ``w``.
    """
    cdef Py_ssize_t n = order.shape[0], D = w.shape[0], step, r, q
    cdef double wscale = 1.0, eta, z, margin, coef, obj_sum = 0.0
    with nogil:
        for step in range(n):
            r = order[step]
            t += 1
            eta = 1.0 / (lam * t)
            z = 0.0
            for q in range(indptr[r], indptr[r + 1]):
                z += w[indices[q]] * values[q]
            margin = y[r] * (wscale * z + b)
            wscale *= 1.0 - eta * lam
            b *= 1.0 - eta * lam
            if wscale == 0.0:
                for q in range(D):
                    w[q] = 0.0
                wscale = 1.0
            if margin < 1.0:
                coef = eta * y[r] / wscale
                for q in range(indptr[r], indptr[r + 1]):
                    w[indices[q]] += coef * values[q]
                b += eta * y[r]
            if track:
                obj_sum += _objective(indptr, indices, values, y, w, wscale, b, lam)
        for q in range(D):
            w[q] *= wscale
    return b, t, (obj_sum / n if track and n > 0 else 0.0)
