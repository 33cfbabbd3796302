# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of `np_backend`: dense forward/backward passes as C loops.

Loop order keeps every inner access contiguous (row-major operands on both
sides of each dot product), which is what makes this competitive with BLAS
for the small layer sizes this package trains.  wraparound is off, so no
negative indexing anywhere in this module.
"""

import numpy as np

from libc.math cimport tanh

BACKEND = "compiled"


cdef void _gemm_nt(double[:, ::1] a, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    # out[i, r] = sum_k a[i, k] * w[r, k]
    cdef Py_ssize_t i, r, k
    cdef double s
    for i in range(a.shape[0]):
        for r in range(w.shape[0]):
            s = 0.0
            for k in range(w.shape[1]):
                s += a[i, k] * w[r, k]
            out[i, r] = s


cdef void _gemm_nt_tanh_bias(double[:, ::1] a, double[:, ::1] w, double[:, ::1] out) noexcept nogil:
    # out[i, r] = tanh(sum_k a[i, k] * w[r, k]); trailing bias column set to 1.
    cdef Py_ssize_t i, r, k
    cdef double s
    for i in range(a.shape[0]):
        for r in range(w.shape[0]):
            s = 0.0
            for k in range(w.shape[1]):
                s += a[i, k] * w[r, k]
            out[i, r] = tanh(s)
        out[i, w.shape[0]] = 1.0


cdef void _grad_accum(double[:, ::1] back, double[:, ::1] act, double[:, ::1] grad) noexcept nogil:
    # grad[r, k] = sum_i back[i, r] * act[i, k]
    cdef Py_ssize_t i, r, k
    cdef double b
    for i in range(back.shape[0]):
        for r in range(back.shape[1]):
            b = back[i, r]
            for k in range(act.shape[1]):
                grad[r, k] += b * act[i, k]


cdef void _back_propagate(double[:, ::1] back, double[:, ::1] w, double[:, ::1] act,
                          double[:, ::1] out) noexcept nogil:
    # out[i, k] = (sum_r back[i, r] * w[r, k]) * (1 - act[i, k]^2) for the
    # non-bias columns k < out.shape[1]; w and act are passed whole.
    cdef Py_ssize_t i, r, k
    cdef Py_ssize_t h = out.shape[1]
    cdef double b
    for i in range(back.shape[0]):
        for k in range(h):
            out[i, k] = 0.0
        for r in range(back.shape[1]):
            b = back[i, r]
            for k in range(h):
                out[i, k] += b * w[r, k]
        for k in range(h):
            out[i, k] *= 1.0 - act[i, k] * act[i, k]


def forward_batch(list weights, X):
    """See `privout._kernels.np_backend.forward_batch`."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t m = X.shape[1]
    prev = np.empty((n, m + 1), dtype=np.float64)
    prev[:, 0:m] = X
    prev[:, m] = 1.0
    acts = [prev]
    cdef Py_ssize_t t
    cdef Py_ssize_t last = len(weights) - 1
    for t in range(len(weights)):
        w = np.ascontiguousarray(weights[t], dtype=np.float64)
        if t == last:
            logits = np.empty((n, w.shape[0]), dtype=np.float64)
            _gemm_nt(prev, w, logits)
            return acts, logits
        nxt = np.empty((n, w.shape[0] + 1), dtype=np.float64)
        _gemm_nt_tanh_bias(prev, w, nxt)
        acts.append(nxt)
        prev = nxt
    raise ValueError("empty weight list")


def backward_from_delta(list weights, list acts, delta):
    """See `privout._kernels.np_backend.backward_from_delta`."""
    back = np.ascontiguousarray(delta, dtype=np.float64)
    grads = [None] * len(weights)
    cdef Py_ssize_t t
    for t in range(len(weights) - 1, -1, -1):
        w = np.ascontiguousarray(weights[t], dtype=np.float64)
        act = np.ascontiguousarray(acts[t], dtype=np.float64)
        grad = np.zeros_like(w)
        _grad_accum(back, act, grad)
        grads[t] = grad
        if t > 0:
            nxt = np.empty((back.shape[0], w.shape[1] - 1), dtype=np.float64)
            _back_propagate(back, w, act, nxt)
            back = nxt
    return grads
