"""Minimal neural-network engine: dense and convolutional layers,
backpropagation with finite-difference verification, plain SGD, and a
portable weights format.

The convolution inner loops live in ``pallor.nn.kernels`` with a compiled
Cython backend and a NumPy fallback selected at import time
(``PALLOR_KERNELS`` overrides the choice).
"""

from .layers import Conv2d, Dense, Flatten, Linear, Relu, Sigmoid, Upsample2x
from .network import (
    Gradients,
    Network,
    NetworkSpec,
    TrainingConfig,
    backward,
    forward,
    gradient_check,
    init_network,
    mse_loss,
    sgd_step,
    train,
)
from .weights_io import Standardization, file_model_id, load_weights, save_weights
from .kernels import backend_name

__all__ = [
    "Conv2d",
    "Dense",
    "Flatten",
    "Linear",
    "Relu",
    "Sigmoid",
    "Upsample2x",
    "Gradients",
    "Network",
    "NetworkSpec",
    "TrainingConfig",
    "backward",
    "forward",
    "gradient_check",
    "init_network",
    "mse_loss",
    "sgd_step",
    "train",
    "Standardization",
    "file_model_id",
    "load_weights",
    "save_weights",
    "backend_name",
]
