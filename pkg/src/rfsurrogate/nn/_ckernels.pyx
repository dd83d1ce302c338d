# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled width-wise convolution kernels.

Same contract as ``_pykernels``; loops run in a fixed order so results do not
depend on batch composition.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def conv_forward(const double[:, :, ::1] x, const double[:, ::1] w, const double[::1] b):
    cdef Py_ssize_t n = x.shape[0], rows = x.shape[1], width = x.shape[2]
    cdef Py_ssize_t nf = w.shape[0], taps = w.shape[1]
    cdef Py_ssize_t ow = width - taps + 1
    out = np.empty((n, nf, rows, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] z = out
    cdef Py_ssize_t i, f, r, c, j
    cdef double acc
    for i in range(n):
        for f in range(nf):
            for r in range(rows):
                for c in range(ow):
                    acc = b[f]
                    for j in range(taps):
                        acc += w[f, j] * x[i, r, c + j]
                    z[i, f, r, c] = acc
    return out


def conv_grad_input(const double[:, :, :, ::1] dz, const double[:, ::1] w, Py_ssize_t width):
    cdef Py_ssize_t n = dz.shape[0], nf = dz.shape[1], rows = dz.shape[2], ow = dz.shape[3]
    cdef Py_ssize_t taps = w.shape[1]
    out = np.empty((n, rows, width), dtype=np.float64)
    cdef double[:, :, ::1] dx = out
    cdef Py_ssize_t i, f, r, p, j, lo, hi
    cdef double acc
    # gather form: each output entry is written once
    for i in range(n):
        for r in range(rows):
            for p in range(width):
                lo = p - ow + 1 if p - ow + 1 > 0 else 0
                hi = p if p < taps - 1 else taps - 1
                acc = 0.0
                for f in range(nf):
                    for j in range(lo, hi + 1):
                        acc += dz[i, f, r, p - j] * w[f, j]
                dx[i, r, p] = acc
    return out


def conv_grad_params(const double[:, :, ::1] x, const double[:, :, :, ::1] dz, Py_ssize_t taps):
    cdef Py_ssize_t n = dz.shape[0], nf = dz.shape[1], rows = dz.shape[2], ow = dz.shape[3]
    dw_arr = np.zeros((nf, taps), dtype=np.float64)
    db_arr = np.zeros(nf, dtype=np.float64)
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t i, f, r, c, j
    cdef double g
    for i in range(n):
        for f in range(nf):
            for r in range(rows):
                for c in range(ow):
                    g = dz[i, f, r, c]
                    db[f] += g
                    for j in range(taps):
                        dw[f, j] += g * x[i, r, c + j]
    return dw_arr, db_arr
