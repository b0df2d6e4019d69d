"""Network container, initialisation, backpropagation, SGD, and the trainer.

Weights are drawn from the uniform Glorot interval
``(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`` using the
package's SplitMix64 stream seeded by the spec, so initialisation is
reproducible bit for bit. Biases start at zero.

The loss is mean squared error over all output elements (batch included);
``backward`` returns its exact analytic gradient and ``gradient_check``
compares that gradient against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NetworkCompositionError
from ..rng import SplitMix64
from .layers import LayerSpec, layer_from_dict

__all__ = [
    "NetworkSpec",
    "Network",
    "TrainingConfig",
    "Gradients",
    "init_network",
    "forward",
    "backward",
    "mse_loss",
    "sgd_step",
    "gradient_check",
    "train",
]

Gradients = list[tuple[np.ndarray, ...]]


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture: input shape (without batch axis), layer list, init seed."""

    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) < 1:
            raise NetworkCompositionError("a network needs at least one layer")
        self.shape_walk()  # raises NetworkCompositionError on bad composition

    def shape_walk(self) -> list[tuple[int, ...]]:
        """Shapes flowing through the network, input first, output last."""
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.out_shape(shapes[-1]))
        return shapes

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.shape_walk()[-1]

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "layers": [layer.to_dict() for layer in self.layers],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            input_shape=tuple(d["input_shape"]),
            layers=tuple(layer_from_dict(ld) for ld in d["layers"]),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class Network:
    """A spec plus one parameter tuple per layer (empty for stateless layers)."""

    spec: NetworkSpec
    params: list[tuple[np.ndarray, ...]] = field(repr=False)

    def param_count(self) -> int:
        return sum(p.size for group in self.params for p in group)

    def flat_params(self) -> np.ndarray:
        if self.param_count() == 0:
            return np.empty(0, dtype=np.float64)
        return np.concatenate([p.ravel() for group in self.params for p in group])

    def copy(self) -> "Network":
        return Network(self.spec, [tuple(p.copy() for p in g) for g in self.params])


def init_network(spec: NetworkSpec) -> Network:
    rng = SplitMix64(spec.seed)
    params: list[tuple[np.ndarray, ...]] = []
    for layer in spec.layers:
        shapes = layer.param_shapes()
        if not shapes:
            params.append(())
            continue
        w_shape, b_shape = shapes
        fan_in, fan_out = layer.fans()
        bound = float(np.sqrt(6.0 / (fan_in + fan_out)))
        n = int(np.prod(w_shape))
        w = rng.uniform_array(n, -bound, bound).reshape(w_shape)
        b = np.zeros(b_shape, dtype=np.float64)
        params.append((w, b))
    return Network(spec, params)


def _as_batch(net: Network, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    ishape = net.spec.input_shape
    if x.shape == ishape:
        return x[None, ...], True
    if x.ndim == len(ishape) + 1 and x.shape[1:] == ishape:
        return x, False
    raise NetworkCompositionError(
        f"input shape {x.shape} does not match network input {ishape} "
        f"(optionally with a leading batch axis)"
    )


def _forward_collect(net: Network, xb: np.ndarray) -> list[np.ndarray]:
    acts = [xb]
    for layer, params in zip(net.spec.layers, net.params):
        acts.append(layer.forward(acts[-1], params))
    return acts


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    xb, squeeze = _as_batch(net, x)
    out = _forward_collect(net, xb)[-1]
    return out[0] if squeeze else out


def mse_loss(output: np.ndarray, target: np.ndarray) -> float:
    diff = np.asarray(output, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(diff * diff))


def backward(net: Network, x: np.ndarray, target: np.ndarray) -> Gradients:
    """Analytic gradient of the MSE loss w.r.t. every weight and bias."""
    xb, squeeze = _as_batch(net, x)
    tb = np.asarray(target, dtype=np.float64)
    if squeeze:
        tb = tb[None, ...]
    acts = _forward_collect(net, xb)
    if acts[-1].shape != tb.shape:
        raise NetworkCompositionError(
            f"target shape {tb.shape} does not match output shape {acts[-1].shape}"
        )
    gy = (2.0 / acts[-1].size) * (acts[-1] - tb)
    grads: Gradients = [()] * len(net.spec.layers)
    for i in range(len(net.spec.layers) - 1, -1, -1):
        layer = net.spec.layers[i]
        gy, gparams = layer.backward(acts[i], net.params[i], gy)
        grads[i] = gparams
    return grads


def sgd_step(net: Network, grads: Gradients, lr: float) -> Network:
    """One plain-SGD update, returned as a new network."""
    new_params = [
        tuple(p - lr * g for p, g in zip(group, ggroup))
        for group, ggroup in zip(net.params, grads)
    ]
    return Network(net.spec, new_params)


def gradient_check(
    net: Network, x: np.ndarray, target: np.ndarray, step: float = 1e-4
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if not step > 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    analytic = backward(net, x, target)
    xb, squeeze = _as_batch(net, x)
    tb = np.asarray(target, dtype=np.float64)
    if squeeze:
        tb = tb[None, ...]

    def loss_now() -> float:
        return mse_loss(_forward_collect(net, xb)[-1], tb)

    worst = 0.0
    for group, ggroup in zip(net.params, analytic):
        for p, g in zip(group, ggroup):
            flat = p.ravel()
            gflat = g.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + step
                up = loss_now()
                flat[idx] = orig - step
                down = loss_now()
                flat[idx] = orig
                cd = (up - down) / (2.0 * step)
                denom = max(abs(gflat[idx]), abs(cd), 1e-12)
                worst = max(worst, abs(gflat[idx] - cd) / denom)
    return worst


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    epochs: int = 1
    batch_size: int = 32
    loss: str = "mse"
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.loss != "mse":
            raise ConfigError(f"only mse loss is supported, got {self.loss!r}")


def train(
    net: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainingConfig,
    on_epoch=None,
) -> tuple[Network, list[float]]:
    """Minibatch SGD over (inputs, targets); returns the trained network and
    the per-epoch mean training loss.

    Shuffling draws from a SplitMix64 stream seeded by ``config.seed``, so
    the whole run is a deterministic function of (net, data order, config).
    ``on_epoch(epoch_index, mean_loss)`` runs after every epoch when given.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape[0] != targets.shape[0]:
        raise ConfigError("inputs and targets disagree on sample count")
    n = inputs.shape[0]
    work = net.copy()
    shuffler = SplitMix64(config.seed)
    history: list[float] = []
    layers = work.spec.layers
    for epoch in range(config.epochs):
        order = shuffler.permutation(n)
        total = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = inputs[idx]
            tb = targets[idx]
            acts = _forward_collect(work, xb)
            total += mse_loss(acts[-1], tb)
            batches += 1
            gy = (2.0 / acts[-1].size) * (acts[-1] - tb)
            for i in range(len(layers) - 1, -1, -1):
                gy, gparams = layers[i].backward(acts[i], work.params[i], gy)
                if gparams:
                    work.params[i] = tuple(
                        p - config.learning_rate * g
                        for p, g in zip(work.params[i], gparams)
                    )
        mean_loss = total / batches
        history.append(mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    return work, history
