"""Layer descriptors and their forward/backward rules.

A network is a flat sequence of these descriptors. Each descriptor is a
frozen dataclass that knows its parameter shapes, its output shape given an
input shape, and how to push activations forward and gradients backward.
Data tensors are float64 with a leading batch axis; convolutional data is
NCHW and convolution is cross-correlation with zero padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NetworkCompositionError
from . import kernels

__all__ = [
    "Dense",
    "Conv2d",
    "Relu",
    "Sigmoid",
    "Linear",
    "Upsample2x",
    "Flatten",
    "LayerSpec",
    "layer_from_dict",
]


@dataclass(frozen=True)
class Dense:
    n_in: int
    n_out: int

    kind = "dense"

    def param_shapes(self):
        return ((self.n_out, self.n_in), (self.n_out,))

    def fans(self):
        return self.n_in, self.n_out

    def out_shape(self, in_shape):
        if in_shape != (self.n_in,):
            raise NetworkCompositionError(
                f"Dense({self.n_in}->{self.n_out}) cannot consume shape {in_shape}"
            )
        return (self.n_out,)

    def forward(self, x, params):
        w, b = params
        return x @ w.T + b

    def backward(self, x, params, gy):
        w, _ = params
        return gy @ w, (gy.T @ x, gy.sum(axis=0))

    def to_dict(self):
        return {"kind": "dense", "n_in": self.n_in, "n_out": self.n_out}


@dataclass(frozen=True)
class Conv2d:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0

    kind = "conv2d"

    def param_shapes(self):
        return ((self.out_ch, self.in_ch, self.kernel, self.kernel), (self.out_ch,))

    def fans(self):
        return self.in_ch * self.kernel**2, self.out_ch * self.kernel**2

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_ch:
            raise NetworkCompositionError(
                f"Conv2d(in_ch={self.in_ch}) cannot consume shape {in_shape}"
            )
        _, h, w = in_shape
        span_h = h + 2 * self.padding - self.kernel
        span_w = w + 2 * self.padding - self.kernel
        if span_h < 0 or span_w < 0:
            raise NetworkCompositionError(
                f"{self.kernel}x{self.kernel} kernel exceeds padded input {in_shape}"
            )
        return (self.out_ch, span_h // self.stride + 1, span_w // self.stride + 1)

    def forward(self, x, params):
        w, b = params
        return kernels.conv2d_forward(x, w, b, self.stride, self.padding)

    def backward(self, x, params, gy):
        w, _ = params
        gw, gb = kernels.conv2d_grad_weights(x, gy, self.kernel, self.stride, self.padding)
        gx = kernels.conv2d_grad_input(gy, w, x.shape[2], x.shape[3], self.stride, self.padding)
        return gx, (gw, gb)

    def to_dict(self):
        return {
            "kind": "conv2d",
            "in_ch": self.in_ch,
            "out_ch": self.out_ch,
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
        }


class _NoParams:
    def param_shapes(self):
        return ()

    def forward(self, x, params):
        raise NotImplementedError

    def backward(self, x, params, gy):
        raise NotImplementedError


@dataclass(frozen=True)
class Relu(_NoParams):
    kind = "relu"

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, params):
        return np.maximum(x, 0.0)

    def backward(self, x, params, gy):
        return gy * (x > 0.0), ()

    def to_dict(self):
        return {"kind": "relu"}


@dataclass(frozen=True)
class Sigmoid(_NoParams):
    kind = "sigmoid"

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, params):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    def backward(self, x, params, gy):
        y = self.forward(x, params)
        return gy * y * (1.0 - y), ()

    def to_dict(self):
        return {"kind": "sigmoid"}


@dataclass(frozen=True)
class Linear(_NoParams):
    """Identity activation; present so specs can state it explicitly."""

    kind = "linear"

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, params):
        return x

    def backward(self, x, params, gy):
        return gy, ()

    def to_dict(self):
        return {"kind": "linear"}


@dataclass(frozen=True)
class Upsample2x(_NoParams):
    """Nearest-neighbour 2x spatial upsampling."""

    kind = "upsample2x"

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise NetworkCompositionError(f"Upsample2x needs (c, h, w), got {in_shape}")
        c, h, w = in_shape
        return (c, 2 * h, 2 * w)

    def forward(self, x, params):
        return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)

    def backward(self, x, params, gy):
        b, c, h, w = x.shape
        return gy.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)), ()

    def to_dict(self):
        return {"kind": "upsample2x"}


@dataclass(frozen=True)
class Flatten(_NoParams):
    kind = "flatten"

    def out_shape(self, in_shape):
        n = 1
        for d in in_shape:
            n *= d
        return (n,)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1)

    def backward(self, x, params, gy):
        return gy.reshape(x.shape), ()

    def to_dict(self):
        return {"kind": "flatten"}


LayerSpec = Dense | Conv2d | Relu | Sigmoid | Linear | Upsample2x | Flatten

_KINDS = {
    "dense": Dense,
    "conv2d": Conv2d,
    "relu": Relu,
    "sigmoid": Sigmoid,
    "linear": Linear,
    "upsample2x": Upsample2x,
    "flatten": Flatten,
}


def layer_from_dict(d: dict) -> LayerSpec:
    kind = d.get("kind")
    if kind not in _KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    args = {k: v for k, v in d.items() if k != "kind"}
    return _KINDS[kind](**args)
