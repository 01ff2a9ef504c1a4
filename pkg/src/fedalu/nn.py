"""Dense ReLU networks with hand-written backpropagation and plain SGD.

Everything is float64. Functions are pure: they never mutate the
parameters they receive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when array dimensions do not match the network."""


@dataclass(frozen=True)
class ModelParams:
    """Weights ``(out, in)`` and biases ``(out,)`` for each dense layer.

    Hidden layers use ReLU, the output layer is linear (raw logits).
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {i}: weight {w.shape} incompatible with bias {b.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i}: expects {w.shape[1]} inputs, previous layer gives "
                    f"{self.weights[i - 1].shape[0]}"
                )

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    def flat(self) -> np.ndarray:
        """All parameters concatenated in layer order (weights then bias)."""
        return np.concatenate([a.ravel() for w, b in zip(self.weights, self.biases) for a in (w, b)])

    def is_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all() for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class Gradients:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for w, b in zip(self.weights, self.biases) for a in (w, b)])


def init_params(layer_dims, seed: int) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ValueError(f"layer_dims must hold at least two positive sizes, got {list(layer_dims)}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(tuple(weights), tuple(biases))


def _check_input(params: ModelParams, x: np.ndarray) -> None:
    expected = params.weights[0].shape[1]
    if x.shape[-1] != expected:
        raise ShapeError(f"input dimension mismatch: expected {expected}, got {x.shape[-1]}")


def _forward_cache(params: ModelParams, x: np.ndarray) -> list[np.ndarray]:
    # activations[0] is the input, activations[-1] the logits
    activations = [x]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = activations[-1] @ w.T + b
        activations.append(z if i == last else np.maximum(z, 0.0))
    return activations


def forward(params: ModelParams, x) -> np.ndarray:
    """Logits for one feature vector ``(d,)`` or a batch ``(n, d)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise ShapeError(f"expected a vector or a batch of vectors, got shape {x.shape}")
    _check_input(params, x)
    return _forward_cache(params, x)[-1]


def backward(params: ModelParams, x, grad_logits) -> Gradients:
    """Mean parameter gradient over a batch.

    ``grad_logits[j]`` is the derivative of sample j's loss with respect to
    its logits; the result is the gradient of the batch-mean loss.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    g = np.atleast_2d(np.asarray(grad_logits, dtype=np.float64))
    if x.shape[0] == 0:
        raise ValueError("backward needs a non-empty batch")
    _check_input(params, x)
    if g.shape != (x.shape[0], params.num_classes):
        raise ShapeError(
            f"logit gradients must have shape {(x.shape[0], params.num_classes)}, got {g.shape}"
        )
    activations = _forward_cache(params, x)
    n = x.shape[0]
    delta = g / n
    gw, gb = [], []
    for i in range(len(params.weights) - 1, -1, -1):
        gw.append(delta.T @ activations[i])
        gb.append(delta.sum(axis=0))
        if i:
            delta = (delta @ params.weights[i]) * (activations[i] > 0)
    return Gradients(tuple(reversed(gw)), tuple(reversed(gb)))


def sgd_step(params: ModelParams, grads: Gradients, lr: float) -> ModelParams:
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if len(grads.weights) != len(params.weights):
        raise ShapeError("gradient layer count does not match parameters")
    new_w, new_b = [], []
    for w, b, gw, gb in zip(params.weights, params.biases, grads.weights, grads.biases):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ShapeError(f"gradient shape {gw.shape} does not match parameter shape {w.shape}")
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise FloatingPointError("non-finite gradient passed to sgd_step")
        new_w.append(w - lr * gw)
        new_b.append(b - lr * gb)
    updated = ModelParams(tuple(new_w), tuple(new_b))
    if not updated.is_finite():
        raise FloatingPointError(f"parameters overflowed after an SGD step with lr={lr}")
    return updated
