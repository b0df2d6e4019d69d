# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled convolution kernels (NCHW float64, cross-correlation).

Padding is materialised by the Python-side wrappers in
``pallor.nn.kernels``; these loops assume valid-mode access only.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def conv2d_forward_padded(double[:, :, :, ::1] xp, double[:, :, :, ::1] w,
                          double[::1] b, int stride, int ho, int wo):
    cdef Py_ssize_t bsz = xp.shape[0]
    cdef Py_ssize_t in_ch = xp.shape[1]
    cdef Py_ssize_t out_ch = w.shape[0]
    cdef Py_ssize_t k = w.shape[2]
    y_arr = np.zeros((bsz, out_ch, ho, wo), dtype=np.float64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t n, o, c, ki, kj, i, j
    cdef double wv, bias
    with nogil:
        for n in range(bsz):
            for o in range(out_ch):
                for c in range(in_ch):
                    for ki in range(k):
                        for kj in range(k):
                            wv = w[o, c, ki, kj]
                            for i in range(ho):
                                for j in range(wo):
                                    y[n, o, i, j] += wv * xp[n, c, i * stride + ki,
                                                             j * stride + kj]
                bias = b[o]
                for i in range(ho):
                    for j in range(wo):
                        y[n, o, i, j] += bias
    return y_arr


def conv2d_grad_weights_padded(double[:, :, :, ::1] xp, double[:, :, :, ::1] gy,
                               int k, int stride):
    cdef Py_ssize_t bsz = xp.shape[0]
    cdef Py_ssize_t in_ch = xp.shape[1]
    cdef Py_ssize_t out_ch = gy.shape[1]
    cdef Py_ssize_t ho = gy.shape[2]
    cdef Py_ssize_t wo = gy.shape[3]
    gw_arr = np.zeros((out_ch, in_ch, k, k), dtype=np.float64)
    gb_arr = np.zeros(out_ch, dtype=np.float64)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t n, o, c, ki, kj, i, j
    cdef double acc
    with nogil:
        for o in range(out_ch):
            for n in range(bsz):
                acc = 0.0
                for i in range(ho):
                    for j in range(wo):
                        acc += gy[n, o, i, j]
                gb[o] += acc
            for c in range(in_ch):
                for ki in range(k):
                    for kj in range(k):
                        acc = 0.0
                        for n in range(bsz):
                            for i in range(ho):
                                for j in range(wo):
                                    acc += gy[n, o, i, j] * xp[n, c, i * stride + ki,
                                                               j * stride + kj]
                        gw[o, c, ki, kj] += acc
    return gw_arr, gb_arr


def conv2d_grad_input_padded(double[:, :, :, ::1] gy, double[:, :, :, ::1] w,
                             int hp, int wp, int stride):
    cdef Py_ssize_t bsz = gy.shape[0]
    cdef Py_ssize_t out_ch = gy.shape[1]
    cdef Py_ssize_t ho = gy.shape[2]
    cdef Py_ssize_t wo = gy.shape[3]
    cdef Py_ssize_t in_ch = w.shape[1]
    cdef Py_ssize_t k = w.shape[2]
    gxp_arr = np.zeros((bsz, in_ch, hp, wp), dtype=np.float64)
    cdef double[:, :, :, ::1] gxp = gxp_arr
    cdef Py_ssize_t n, o, c, ki, kj, i, j
    cdef double wv
    with nogil:
        for n in range(bsz):
            for c in range(in_ch):
                for o in range(out_ch):
                    for ki in range(k):
                        for kj in range(k):
                            wv = w[o, c, ki, kj]
                            for i in range(ho):
                                for j in range(wo):
                                    gxp[n, c, i * stride + ki, j * stride + kj] += \
                                        wv * gy[n, o, i, j]
    return gxp_arr
