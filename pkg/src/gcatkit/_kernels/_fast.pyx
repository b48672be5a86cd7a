# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``gcatkit._kernels.pure``.

Same function set and semantics; plain C loops instead of numpy
vectorization. Accumulation order is sequential, so results may differ
from the pure backend in the last few ulps but are deterministic within
a backend.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as c_exp

cnp.import_array()

BACKEND_NAME = "fast"


def leaky_relu(cnp.ndarray x, double slope):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    for i in range(n):
        out[i] = flat[i] if flat[i] > 0.0 else slope * flat[i]
    return out.reshape(np.asarray(x).shape)


def leaky_relu_grad(cnp.ndarray x, cnp.ndarray grad_out, double slope):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xf = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gf = np.ascontiguousarray(grad_out, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(xf)
    cdef Py_ssize_t i, n = xf.shape[0]
    for i in range(n):
        out[i] = gf[i] if xf[i] > 0.0 else slope * gf[i]
    return out.reshape(np.asarray(x).shape)


def segment_softmax(cnp.ndarray logits, cnp.ndarray offsets):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(z)
    cdef Py_ssize_t s, i, lo, hi, n_seg = off.shape[0] - 1
    cdef double m, total
    for s in range(n_seg):
        lo = off[s]
        hi = off[s + 1]
        m = z[lo]
        for i in range(lo + 1, hi):
            if z[i] > m:
                m = z[i]
        total = 0.0
        for i in range(lo, hi):
            out[i] = c_exp(z[i] - m)
            total += out[i]
        for i in range(lo, hi):
            out[i] /= total
    return out


def segment_softmax_grad(cnp.ndarray probs, cnp.ndarray grad_out, cnp.ndarray offsets):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(p)
    cdef Py_ssize_t s, i, lo, hi, n_seg = off.shape[0] - 1
    cdef double dot
    for s in range(n_seg):
        lo = off[s]
        hi = off[s + 1]
        dot = 0.0
        for i in range(lo, hi):
            dot += p[i] * g[i]
        for i in range(lo, hi):
            out[i] = p[i] * (g[i] - dot)
    return out


def abs_sum(cnp.ndarray x):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = flat.shape[0]
    cdef double total = 0.0
    for i in range(n):
        total += flat[i] if flat[i] >= 0.0 else -flat[i]
    return total


def sign_zero(cnp.ndarray x):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    for i in range(n):
        if flat[i] > 0.0:
            out[i] = 1.0
        elif flat[i] < 0.0:
            out[i] = -1.0
        else:
            out[i] = 0.0
    return out.reshape(np.asarray(x).shape)


def conv3(cnp.ndarray stack, cnp.ndarray filters):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.ascontiguousarray(stack, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] f = np.ascontiguousarray(filters, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], m = f.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(m):
            out[i, j] = s[i, 0] * f[j, 0] + s[i, 1] * f[j, 1] + s[i, 2] * f[j, 2]
    return out


def l1_scores(cnp.ndarray cands, cnp.ndarray target):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(cands, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], d = c.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double acc, diff
    for i in range(n):
        acc = 0.0
        for j in range(d):
            diff = c[i, j] - t[j]
            acc += diff if diff >= 0.0 else -diff
        out[i] = acc
    return out


def convkb_scores(cnp.ndarray h, cnp.ndarray r, cnp.ndarray t,
                  cnp.ndarray filters, cnp.ndarray w_out):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] hh = np.ascontiguousarray(h, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rr = np.ascontiguousarray(r, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] f = np.ascontiguousarray(filters, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(w_out, dtype=np.float64)
    cdef Py_ssize_t n = hh.shape[0], d = hh.shape[1], m = f.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t i, j, k
    cdef double pre, acc, f0, f1, f2
    for i in range(n):
        acc = 0.0
        for k in range(m):
            f0 = f[k, 0]
            f1 = f[k, 1]
            f2 = f[k, 2]
            for j in range(d):
                pre = hh[i, j] * f0 + rr[i, j] * f1 + tt[i, j] * f2
                if pre > 0.0:
                    acc += pre * w[k * d + j]
        out[i] = acc
    return out


def rank_counts(cnp.ndarray scores, Py_ssize_t true_idx, cnp.ndarray filter_mask):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] mask = np.ascontiguousarray(filter_mask, dtype=np.uint8)
    cdef Py_ssize_t i, n = s.shape[0]
    cdef double s_true = s[true_idx]
    cdef Py_ssize_t less_raw = 0, eq_raw = 0, less_f = 0, eq_f = 0
    for i in range(n):
        if i == true_idx:
            continue
        if s[i] < s_true:
            less_raw += 1
            if mask[i] == 0:
                less_f += 1
        elif s[i] == s_true:
            eq_raw += 1
            if mask[i] == 0:
                eq_f += 1
    return less_raw, eq_raw, less_f, eq_f
