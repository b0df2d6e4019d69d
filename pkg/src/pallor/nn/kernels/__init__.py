"""Hot-kernel backend selection.

The convolution kernels exist twice: a compiled Cython extension
(``pallor.nn._cyconv``) and a vectorised NumPy fallback. The backend is
chosen once at import time:

* ``PALLOR_KERNELS=cython`` forces the compiled extension (ImportError if it
  was not built);
* ``PALLOR_KERNELS=numpy`` forces the fallback;
* unset: the compiled extension if importable, NumPy otherwise.

Both backends compute the same quantities; results differ only in
floating-point summation order. ``benchmarks/bench_kernels.py`` compares
their throughput on training-shaped workloads.
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy_backend

__all__ = [
    "backend_name",
    "conv2d_forward",
    "conv2d_grad_weights",
    "conv2d_grad_input",
]

_choice = os.environ.get("PALLOR_KERNELS", "").strip().lower()
_cy = None
if _choice in ("", "cython"):
    try:
        from pallor.nn import _cyconv as _cy
    except ImportError:
        if _choice == "cython":
            raise ImportError(
                "PALLOR_KERNELS=cython but the compiled extension is not built; "
                "reinstall the package or unset the variable"
            )
        _cy = None
elif _choice != "numpy":
    raise ValueError(f"PALLOR_KERNELS must be 'cython' or 'numpy', got {_choice!r}")


def backend_name() -> str:
    return "cython" if _cy is not None else "numpy"


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_forward(x, w, b, stride: int, pad: int):
    if _cy is None:
        return _numpy_backend.conv2d_forward(x, w, b, stride, pad)
    h, wd = x.shape[2], x.shape[3]
    k = w.shape[2]
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    return _cy.conv2d_forward_padded(
        _pad(x, pad), np.ascontiguousarray(w), np.ascontiguousarray(b), stride, ho, wo
    )


def conv2d_grad_weights(x, gy, k: int, stride: int, pad: int):
    if _cy is None:
        return _numpy_backend.conv2d_grad_weights(x, gy, k, stride, pad)
    return _cy.conv2d_grad_weights_padded(
        _pad(x, pad), np.ascontiguousarray(gy), k, stride
    )


def conv2d_grad_input(gy, w, h: int, wd: int, stride: int, pad: int):
    if _cy is None:
        return _numpy_backend.conv2d_grad_input(gy, w, h, wd, stride, pad)
    gxp = _cy.conv2d_grad_input_padded(
        np.ascontiguousarray(gy), np.ascontiguousarray(w), h + 2 * pad, wd + 2 * pad, stride
    )
    if pad == 0:
        return gxp
    return gxp[:, :, pad : pad + h, pad : pad + wd]
