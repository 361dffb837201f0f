"""Per-device feed-forward classifier trained with mini-batch SGD.

Parameters live in one flat vector so that client updates can be stacked
row-wise into the K x B gradient matrix.  Layer ``l`` occupies
``fan_in * fan_out`` weights (row-major, ``W[in, out]``) followed by
``fan_out`` biases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelConfig",
    "LearnerError",
    "num_params",
    "unflatten",
    "flatten",
    "init_weights",
    "forward",
    "predict",
    "loss_and_gradient",
    "client_update",
    "subsample_size",
    "flops_per_sample",
]


class LearnerError(ValueError):
    """Invalid model or batch input."""


@dataclass(frozen=True)
class ModelConfig:
    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise LearnerError(f"need >= 2 layers of positive size, got {sizes}")
        if self.activation != "relu":
            raise LearnerError(f"unsupported activation {self.activation!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def shapes(self):
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]


def num_params(config: ModelConfig) -> int:
    return sum((fi + 1) * fo for fi, fo in config.shapes)


def unflatten(config: ModelConfig, flat: np.ndarray):
    """List of ``(W, b)`` views into ``flat``."""
    flat = np.asarray(flat)
    if flat.shape != (num_params(config),):
        raise LearnerError(f"expected {num_params(config)} parameters, got {flat.shape}")
    layers, pos = [], 0
    for fi, fo in config.shapes:
        w = flat[pos:pos + fi * fo].reshape(fi, fo)
        pos += fi * fo
        b = flat[pos:pos + fo]
        pos += fo
        layers.append((w, b))
    return layers


def flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in layers])


def init_weights(config: ModelConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    parts = []
    for fi, fo in config.shapes:
        bound = math.sqrt(6.0 / (fi + fo))
        parts.append(rng.uniform(-bound, bound, size=fi * fo))
        parts.append(np.zeros(fo))
    return np.concatenate(parts)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_pass(config, flat, x):
    layers = unflatten(config, flat)
    acts = [x]
    h = x
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return layers, acts


def forward(config: ModelConfig, weights, inputs) -> np.ndarray:
    """Class probabilities, one row per input."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[1] != config.layer_sizes[0]:
        raise LearnerError(f"input dim {x.shape[1]} != {config.layer_sizes[0]}")
    _, acts = _forward_pass(config, np.asarray(weights, dtype=float), x)
    probs = _softmax(acts[-1])
    if not np.all(np.isfinite(probs)):
        raise FloatingPointError("non-finite model output")
    return probs


def predict(config: ModelConfig, weights, inputs) -> np.ndarray:
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    _, acts = _forward_pass(config, np.asarray(weights, dtype=float), x)
    return np.argmax(acts[-1], axis=1)


def loss_and_gradient(config: ModelConfig, weights, inputs, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. the flat weights."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(labels, dtype=int).ravel()
    m = x.shape[0]
    if m < 1 or y.shape[0] != m:
        raise LearnerError(f"batch of {m} inputs with {y.shape[0]} labels")
    if y.min() < 0 or y.max() >= config.num_classes:
        raise LearnerError(f"labels must lie in [0, {config.num_classes})")
    layers, acts = _forward_pass(config, np.asarray(weights, dtype=float), x)
    logits = acts[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -float(log_probs[np.arange(m), y].mean())

    delta = np.exp(log_probs)
    delta[np.arange(m), y] -= 1.0
    delta /= m
    grads = []
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        a_in = acts[i]
        grads.append((a_in.T @ delta, delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ w.T) * (acts[i] > 0)
    return loss, flatten(grads[::-1])


def subsample_size(n: int, q: float) -> int:
    """``ceil(q * n)`` with a guard against float fuzz such as 0.3 * 10."""
    return int(math.ceil(q * n - 1e-9))


def client_update(
    config: ModelConfig,
    weights,
    inputs,
    labels,
    alpha: int,
    q: float,
    batch_size: int,
    eta: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run ``alpha`` SGD epochs over a ``ceil(q |D|)`` subsample; return new weights.

    The subsample is drawn once per call (one communication round); each epoch
    reshuffles it and includes the final partial batch.
    """
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(labels, dtype=int)
    n = x.shape[0]
    if alpha < 1:
        raise LearnerError(f"alpha must be >= 1, got {alpha}")
    if not 0 < q <= 1:
        raise LearnerError(f"q must lie in (0, 1], got {q}")
    if not eta >= 0:
        raise LearnerError(f"learning rate must be >= 0, got {eta}")
    if q * n < 1 - 1e-9:
        raise LearnerError(f"q * |D| = {q * n:g} is below one sample")
    n_use = subsample_size(n, q)
    idx = np.arange(n) if n_use == n else np.sort(rng.choice(n, size=n_use, replace=False))
    w = np.array(weights, dtype=float)
    for _ in range(alpha):
        order = idx[rng.permutation(n_use)]
        for start in range(0, n_use, batch_size):
            batch = order[start:start + batch_size]
            _, grad = loss_and_gradient(config, w, x[batch], y[batch])
            w -= eta * grad
    return w


def flops_per_sample(config: ModelConfig) -> int:
    """Forward ``sum 2 * fan_in * fan_out``; backward twice that; total 3x forward."""
    fwd = sum(2 * fi * fo for fi, fo in config.shapes)
    return 3 * fwd
