"""NumPy fallback for the 2-D convolution kernels.

Layout is NCHW for activations and (out, in, kh, kw) for weights.  Forward
and the weight gradient go through an im2col view + tensordot so BLAS does
the heavy lifting; the input gradient accumulates one shifted slice per
kernel tap, which keeps the summation order fixed and reproducible.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_NAME = "python"


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    n, cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ValueError(f"channel mismatch: input {cin}, weight {cin_w}")
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    # windows: (n, cin, oh, ow, kh, kw)
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (n, oh, ow, cout)
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def conv2d_backward_weight(
    gy: np.ndarray, x: np.ndarray, w_shape: tuple, stride: int, pad: int
) -> np.ndarray:
    cout, cin, kh, kw = w_shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # sum over batch and output positions
    gw = np.tensordot(gy, win, axes=([0, 2, 3], [0, 2, 3]))  # (cout, cin, kh, kw)
    return np.ascontiguousarray(gw)


def conv2d_backward_input(
    gy: np.ndarray, w: np.ndarray, x_shape: tuple, stride: int, pad: int
) -> np.ndarray:
    n, cin, h, wd = x_shape
    cout, _, kh, kw = w.shape
    oh, ow = gy.shape[2], gy.shape[3]
    gx_pad = np.zeros((n, cin, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
    # gcol[n, cin, kh, kw, oh, ow] contribution, accumulated tap by tap
    gcol = np.tensordot(w, gy, axes=([0], [1]))  # (cin, kh, kw, n, oh, ow)
    for i in range(kh):
        ie = i + stride * oh
        for j in range(kw):
            je = j + stride * ow
            gx_pad[:, :, i:ie:stride, j:je:stride] += gcol[:, i, j].transpose(1, 0, 2, 3)
    if pad:
        return gx_pad[:, :, pad:-pad, pad:-pad].copy()
    return gx_pad
