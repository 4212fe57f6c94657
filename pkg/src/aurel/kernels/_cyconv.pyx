# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled 2-D convolution kernels (NCHW), direct-loop implementation.

Same contracts as aurel.kernels.pyconv; selected automatically at import
when the extension built.  Loops are ordered so accumulation is a fixed
left-to-right sum, keeping results reproducible run to run.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def conv2d_forward(cnp.ndarray x_arr, cnp.ndarray w_arr, int stride, int pad):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    if w.shape[1] != cin:
        raise ValueError("channel mismatch: input %d, weight %d" % (cin, w.shape[1]))
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wid + 2 * pad - kw) // stride + 1
    y_arr = np.zeros((n, cout, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t b, co, ci, oy, ox, i, j, iy, ix
    cdef double acc
    for b in range(n):
        for co in range(cout):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for i in range(kh):
                            iy = oy * stride + i - pad
                            if iy < 0 or iy >= h:
                                continue
                            for j in range(kw):
                                ix = ox * stride + j - pad
                                if ix < 0 or ix >= wid:
                                    continue
                                acc += x[b, ci, iy, ix] * w[co, ci, i, j]
                    y[b, co, oy, ox] = acc
    return y_arr


def conv2d_backward_weight(cnp.ndarray gy_arr, cnp.ndarray x_arr, tuple w_shape,
                           int stride, int pad):
    cdef double[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef Py_ssize_t cout = w_shape[0], kh = w_shape[2], kw = w_shape[3]
    cdef Py_ssize_t oh = gy.shape[2], ow = gy.shape[3]
    gw_arr = np.zeros((cout, cin, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, co, ci, oy, ox, i, j, iy, ix
    cdef double acc
    for co in range(cout):
        for ci in range(cin):
            for i in range(kh):
                for j in range(kw):
                    acc = 0.0
                    for b in range(n):
                        for oy in range(oh):
                            iy = oy * stride + i - pad
                            if iy < 0 or iy >= h:
                                continue
                            for ox in range(ow):
                                ix = ox * stride + j - pad
                                if ix < 0 or ix >= wid:
                                    continue
                                acc += gy[b, co, oy, ox] * x[b, ci, iy, ix]
                    gw[co, ci, i, j] = acc
    return gw_arr


def conv2d_backward_input(cnp.ndarray gy_arr, cnp.ndarray w_arr, tuple x_shape,
                          int stride, int pad):
    cdef double[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef Py_ssize_t n = x_shape[0], cin = x_shape[1], h = x_shape[2], wid = x_shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = gy.shape[2], ow = gy.shape[3]
    gx_arr = np.zeros((n, cin, h, wid), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t b, co, ci, oy, ox, i, j, iy, ix
    for b in range(n):
        for co in range(cout):
            for oy in range(oh):
                for ox in range(ow):
                    for ci in range(cin):
                        for i in range(kh):
                            iy = oy * stride + i - pad
                            if iy < 0 or iy >= h:
                                continue
                            for j in range(kw):
                                ix = ox * stride + j - pad
                                if ix < 0 or ix >= wid:
                                    continue
                                gx[b, ci, iy, ix] += gy[b, co, oy, ox] * w[co, ci, i, j]
    return gx_arr
