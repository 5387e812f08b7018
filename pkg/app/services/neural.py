"""Dense feed-forward networks with exact backpropagation, optimizers and the
binary checkpoint codec."""

from __future__ import annotations

import struct

from pathlib import Path
from typing import Literal, Optional, Protocol, Sequence

import numpy as np

from app.core.errors import CheckpointFormatError, NumericError, ShapeError
from app.util.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION

Activation = Literal["identity", "relu"]
Gradients = list[np.ndarray]


class ForwardCache:
    __slots__ = ("inputs", "pre_activations", "squeeze")

    def __init__(self, inputs: list[np.ndarray], pre_activations: list[np.ndarray], squeeze: bool) -> None:
        self.inputs = inputs
        self.pre_activations = pre_activations
        self.squeeze = squeeze


class DenseNetwork:
    """Affine layers with rectifier hidden units; weights are stored (fan_in, fan_out)."""

    def __init__(
        self,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        *,
        output_activation: Activation = "identity",
    ) -> None:
        if len(weights) != len(biases) or not weights:
            raise ShapeError("a network needs one bias per weight matrix and at least one layer")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        self.output_activation: Activation = output_activation
        for index, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {index}: weight {w.shape} and bias {b.shape} disagree")
            if index and w.shape[0] != self.weights[index - 1].shape[1]:
                raise ShapeError(f"layer {index} expects {w.shape[0]} inputs")

    @classmethod
    def initialize(
        cls,
        layer_dims: Sequence[int],
        rng: np.random.Generator,
        *,
        output_activation: Activation = "identity",
    ) -> "DenseNetwork":
        """Uniform ±sqrt(6/(fan_in+fan_out)) weights, zero biases."""
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ShapeError(f"invalid layer dims {list(layer_dims)}")
        weights = []
        biases = []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, output_activation=output_activation)

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(self.weights, self.biases, output_activation=self.output_activation)

    def load_from(self, other: "DenseNetwork") -> None:
        if other.layer_dims != self.layer_dims:
            raise ShapeError(f"cannot copy dims {other.layer_dims} into {self.layer_dims}")
        for target, source in zip(self.parameters(), other.parameters()):
            target[...] = source

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        return self.forward_cached(inputs)[0]

    def forward_cached(self, inputs: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(inputs, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[np.newaxis, :]
        if x.shape[1] != self.weights[0].shape[0]:
            raise ShapeError(f"network expects {self.weights[0].shape[0]} inputs, got {x.shape[1]}")

        layer_inputs: list[np.ndarray] = []
        pre_activations: list[np.ndarray] = []
        last = len(self.weights) - 1
        for index, (w, b) in enumerate(zip(self.weights, self.biases)):
            layer_inputs.append(x)
            z = x @ w + b
            pre_activations.append(z)
            if index < last or self.output_activation == "relu":
                x = np.maximum(z, 0.0)
            else:
                x = z
        return (x[0] if squeeze else x), ForwardCache(layer_inputs, pre_activations, squeeze)

    def backward(self, cache: ForwardCache, upstream: np.ndarray) -> tuple[Gradients, np.ndarray]:
        """Parameter gradients (aligned with parameters()) and the input gradient.

        Gradients are summed over the batch rows.
        """
        grad = np.asarray(upstream, dtype=np.float64)
        if cache.squeeze:
            grad = grad[np.newaxis, :]
        last = len(self.weights) - 1
        if self.output_activation == "relu":
            grad = grad * (cache.pre_activations[last] > 0.0)

        gradients: Gradients = [np.empty(0)] * (2 * len(self.weights))
        for index in range(last, -1, -1):
            gradients[2 * index] = cache.inputs[index].T @ grad
            gradients[2 * index + 1] = grad.sum(axis=0)
            grad = grad @ self.weights[index].T
            if index > 0:
                grad = grad * (cache.pre_activations[index - 1] > 0.0)
        return gradients, (grad[0] if cache.squeeze else grad)


def forward(net: DenseNetwork, inputs: np.ndarray) -> np.ndarray:
    return net.forward(inputs)


def backward(
    net: DenseNetwork, inputs: np.ndarray, upstream: np.ndarray
) -> tuple[Gradients, np.ndarray]:
    _, cache = net.forward_cached(inputs)
    return net.backward(cache, upstream)


class Optimizer(Protocol):
    learning_rate: float

    def step(self, params: list[np.ndarray], grads: Gradients) -> None: ...


class SgdOptimizer:
    """θ ← θ − α∇L."""

    def __init__(self, learning_rate: float) -> None:
        if learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        self.learning_rate = learning_rate

    def step(self, params: list[np.ndarray], grads: Gradients) -> None:
        for param, grad in zip(params, grads):
            param -= self.learning_rate * grad


class AdamOptimizer:
    def __init__(
        self,
        learning_rate: float,
        *,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> None:
        if learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self._first: Optional[list[np.ndarray]] = None
        self._second: Optional[list[np.ndarray]] = None
        self._steps = 0

    def step(self, params: list[np.ndarray], grads: Gradients) -> None:
        if self._first is None or self._second is None:
            self._first = [np.zeros_like(p) for p in params]
            self._second = [np.zeros_like(p) for p in params]
        self._steps += 1
        correction1 = 1.0 - self.beta1**self._steps
        correction2 = 1.0 - self.beta2**self._steps
        for param, grad, first, second in zip(params, grads, self._first, self._second):
            first *= self.beta1
            first += (1.0 - self.beta1) * grad
            second *= self.beta2
            second += (1.0 - self.beta2) * grad * grad
            param -= (
                self.learning_rate
                * (first / correction1)
                / (np.sqrt(second / correction2) + self.epsilon)
            )


def make_optimizer(kind: str, learning_rate: float) -> Optimizer:
    if kind == "sgd":
        return SgdOptimizer(learning_rate)
    if kind == "adam":
        return AdamOptimizer(learning_rate)
    raise ValueError(f"unknown optimizer {kind!r}")


def check_finite(arrays: Sequence[np.ndarray], what: str) -> None:
    for index, array in enumerate(arrays):
        if not np.all(np.isfinite(array)):
            raise NumericError(f"non-finite {what} in tensor {index}")


def apply_parameter_update(
    params: list[np.ndarray], optimizer: Optimizer, grads: Gradients
) -> None:
    if len(params) != len(grads):
        raise ShapeError(f"{len(grads)} gradients for {len(params)} parameters")
    for param, grad in zip(params, grads):
        if param.shape != grad.shape:
            raise ShapeError(f"gradient shape {grad.shape} does not match parameter {param.shape}")
    check_finite(grads, "gradient")
    staged = [param.copy() for param in params]
    optimizer.step(staged, grads)
    check_finite(staged, "parameter")
    for param, update in zip(params, staged):
        param[...] = update


def apply_gradients(net: DenseNetwork, optimizer: Optimizer, grads: Gradients) -> DenseNetwork:
    apply_parameter_update(net.parameters(), optimizer, grads)
    return net


_HEADER = struct.Struct("<4sII")
_DIM = struct.Struct("<I")


def to_bytes(net: DenseNetwork) -> bytes:
    dims = net.layer_dims
    chunks = [_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(dims))]
    chunks.extend(_DIM.pack(d) for d in dims)
    for w, b in zip(net.weights, net.biases):
        chunks.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(chunks)


def from_bytes(
    payload: bytes,
    *,
    expected_dims: Optional[Sequence[int]] = None,
    output_activation: Activation = "identity",
) -> DenseNetwork:
    if len(payload) < _HEADER.size:
        raise CheckpointFormatError("checkpoint is shorter than its header")
    magic, version, dim_count = _HEADER.unpack_from(payload, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    offset = _HEADER.size
    if dim_count < 2 or len(payload) < offset + dim_count * _DIM.size:
        raise CheckpointFormatError("truncated layer dims")
    dims = [_DIM.unpack_from(payload, offset + i * _DIM.size)[0] for i in range(dim_count)]
    offset += dim_count * _DIM.size
    if expected_dims is not None and list(expected_dims) != dims:
        raise ShapeError(f"checkpoint dims {dims} differ from expected {list(expected_dims)}")

    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weight_bytes = fan_in * fan_out * 8
        bias_bytes = fan_out * 8
        if len(payload) < offset + weight_bytes + bias_bytes:
            raise CheckpointFormatError("truncated parameter data")
        weights.append(
            np.frombuffer(payload, dtype="<f8", count=fan_in * fan_out, offset=offset)
            .reshape(fan_in, fan_out)
            .astype(np.float64)
        )
        offset += weight_bytes
        biases.append(
            np.frombuffer(payload, dtype="<f8", count=fan_out, offset=offset).astype(np.float64)
        )
        offset += bias_bytes
    if offset != len(payload):
        raise CheckpointFormatError(f"{len(payload) - offset} trailing bytes after parameters")
    return DenseNetwork(weights, biases, output_activation=output_activation)


def save(net: DenseNetwork, path: Path) -> None:
    Path(path).write_bytes(to_bytes(net))


def load(
    path: Path,
    *,
    expected_dims: Optional[Sequence[int]] = None,
    output_activation: Activation = "identity",
) -> DenseNetwork:
    return from_bytes(
        Path(path).read_bytes(),
        expected_dims=expected_dims,
        output_activation=output_activation,
    )
