"""NumPy implementations of the convolution hot kernels.

Each kernel-position shift is one vectorised einsum over the whole batch, so
the Python-level loop runs only k*k times. This is the fallback backend when
the compiled extension is unavailable and the reference the compiled kernels
are tested against.

Tensors are NCHW float64; convolution is cross-correlation with zero padding.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int
) -> np.ndarray:
    bsz, _, h, wd = x.shape
    out_ch, _, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = _pad(x, pad)
    y = np.zeros((bsz, out_ch, ho, wo), dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            view = xp[:, :, ki : ki + stride * (ho - 1) + 1 : stride,
                      kj : kj + stride * (wo - 1) + 1 : stride]
            y += np.einsum("oc,bchw->bohw", w[:, :, ki, kj], view, optimize=True)
    y += b[None, :, None, None]
    return y


def conv2d_grad_weights(
    x: np.ndarray, gy: np.ndarray, k: int, stride: int, pad: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the loss w.r.t. kernel weights and bias."""
    _, in_ch, _, _ = x.shape
    _, out_ch, ho, wo = gy.shape
    xp = _pad(x, pad)
    gw = np.empty((out_ch, in_ch, k, k), dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            view = xp[:, :, ki : ki + stride * (ho - 1) + 1 : stride,
                      kj : kj + stride * (wo - 1) + 1 : stride]
            gw[:, :, ki, kj] = np.einsum("bohw,bchw->oc", gy, view, optimize=True)
    gb = gy.sum(axis=(0, 2, 3))
    return gw, gb


def conv2d_grad_input(
    gy: np.ndarray, w: np.ndarray, h: int, wd: int, stride: int, pad: int
) -> np.ndarray:
    """Gradient of the loss w.r.t. the (unpadded) input of shape (b, c, h, wd)."""
    bsz, _, ho, wo = gy.shape
    _, in_ch, k, _ = w.shape
    gxp = np.zeros((bsz, in_ch, h + 2 * pad, wd + 2 * pad), dtype=np.float64)
    for ki in range(k):
        for kj in range(k):
            contrib = np.einsum("oc,bohw->bchw", w[:, :, ki, kj], gy, optimize=True)
            gxp[:, :, ki : ki + stride * (ho - 1) + 1 : stride,
                kj : kj + stride * (wo - 1) + 1 : stride] += contrib
    if pad == 0:
        return gxp
    return gxp[:, :, pad : pad + h, pad : pad + wd]
