"""Fully connected classifier: forward pass, cross-entropy loss, backprop, minibatch SGD.

Activation layout for an ``L``-layer network (``L`` affine maps): ReLU after
affine maps ``1 .. L-2``, nothing after map ``L-1`` (the last hidden map), and
softmax after the output map ``L``. With the default 52-64-256-128-256-128-64-2
architecture that is ReLU after the first five hidden maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import DTYPE, ShapeError, check_finite, log_softmax, make_rng, softmax

DEFAULT_ARCH = (52, 64, 256, 128, 256, 128, 64, 2)


@dataclass
class DenseModel:
    """Weights ``W[i]`` have shape ``(arch[i+1], arch[i])``; biases ``b[i]`` have length ``arch[i+1]``."""

    arch: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.arch = tuple(int(n) for n in self.arch)
        if len(self.arch) < 2 and self.weights:
            raise ShapeError("architecture needs an input and an output size")
        if len(self.weights) != len(self.biases) or len(self.weights) != max(len(self.arch) - 1, 0):
            raise ShapeError("layer count does not match the architecture")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.arch[i + 1], self.arch[i]) or b.shape != (self.arch[i + 1],):
                raise ShapeError(
                    f"layer {i}: weights {w.shape} / bias {b.shape} do not match "
                    f"{self.arch[i]} -> {self.arch[i + 1]}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "DenseModel":
        return DenseModel(self.arch, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 64
    epochs: int = 30
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float = field(default=float("nan"))


def param_count(arch) -> int:
    return sum(a * b + b for a, b in zip(arch[:-1], arch[1:]))


def init_model(arch=DEFAULT_ARCH, seed=0) -> DenseModel:
    """He-uniform weights (bound ``sqrt(6 / fan_in)``), zero biases."""
    rng = make_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(arch[:-1], arch[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(DTYPE))
        biases.append(np.zeros(fan_out, dtype=DTYPE))
    return DenseModel(tuple(arch), weights, biases)


def zeros_model(arch) -> DenseModel:
    return DenseModel(
        tuple(arch),
        [np.zeros((o, i), dtype=DTYPE) for i, o in zip(arch[:-1], arch[1:])],
        [np.zeros(o, dtype=DTYPE) for o in arch[1:]],
    )


def _uses_relu(layer: int, n_layers: int) -> bool:
    return layer < n_layers - 2


def _as_batch(model: DenseModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=DTYPE)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.arch[0]:
        raise ShapeError(f"input of shape {np.shape(x)} does not match input size {model.arch[0]}")
    return x, single


def _forward_cached(model: DenseModel, x: np.ndarray):
    acts, pre = [x], []
    h = x
    n = model.n_layers
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, DTYPE(0)) if _uses_relu(i, n) else z
        acts.append(h)
    return acts, pre


def logits(model: DenseModel, x) -> np.ndarray:
    xb, single = _as_batch(model, x)
    out = _forward_cached(model, xb)[1][-1]
    return out[0] if single else out


def forward(model: DenseModel, x) -> np.ndarray:
    """Class probabilities for one sample (1-D ``x``) or a batch (2-D ``x``)."""
    xb, single = _as_batch(model, x)
    probs = softmax(_forward_cached(model, xb)[1][-1], axis=1)
    return probs[0] if single else probs


def predict(model: DenseModel, x) -> np.ndarray:
    """Argmax class per sample; ties go to the lowest class index."""
    xb, _ = _as_batch(model, x)
    return np.argmax(logits(model, xb), axis=1)


def _check_labels(model: DenseModel, x, y):
    xb, _ = _as_batch(model, x)
    y = np.asarray(y)
    if xb.shape[0] == 0:
        raise ValueError("empty batch")
    if y.shape != (xb.shape[0],):
        raise ShapeError(f"{xb.shape[0]} inputs but labels of shape {y.shape}")
    if y.min() < 0 or y.max() >= model.arch[-1]:
        raise ValueError("labels outside the class range")
    return xb, y.astype(np.int64)


def _penalty(model: DenseModel, l2_penalty: float) -> float:
    if l2_penalty == 0:
        return 0.0
    return 0.5 * l2_penalty * sum(float(np.sum(w.astype(np.float64) ** 2)) for w in model.weights)


def loss(model: DenseModel, x, y, l2_penalty: float = 0.0) -> float:
    """Mean negative log-likelihood plus ``l2_penalty * sum(||W||^2) / 2`` (biases unpenalised)."""
    xb, y = _check_labels(model, x, y)
    logp = log_softmax(logits(model, xb), axis=1)
    nll = -float(np.mean(logp[np.arange(len(y)), y], dtype=np.float64))
    return nll + _penalty(model, l2_penalty)


def backward(model: DenseModel, x, y, l2_penalty: float = 0.0) -> Gradients:
    """Gradients of :func:`loss` with respect to every weight and bias."""
    xb, y = _check_labels(model, x, y)
    n = xb.shape[0]
    acts, pre = _forward_cached(model, xb)
    logp = log_softmax(pre[-1], axis=1)
    value = -float(np.mean(logp[np.arange(n), y], dtype=np.float64)) + _penalty(model, l2_penalty)

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1
    delta /= DTYPE(n)

    gw = [None] * model.n_layers
    gb = [None] * model.n_layers
    for i in reversed(range(model.n_layers)):
        gw[i] = delta.T @ acts[i]
        if l2_penalty:
            gw[i] += DTYPE(l2_penalty) * model.weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = delta @ model.weights[i]
            if _uses_relu(i - 1, model.n_layers):
                delta *= pre[i - 1] > 0
    return Gradients(gw, gb, value)


def sgd_step(model: DenseModel, grads: Gradients, lr: float) -> None:
    lr = DTYPE(lr)
    for w, b, dw, db in zip(model.weights, model.biases, grads.weights, grads.biases):
        w -= lr * dw
        b -= lr * db


def iterate_minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(model: DenseModel, x, y, cfg: TrainConfig) -> tuple[DenseModel, list[float]]:
    """Minibatch SGD; returns a trained copy and the mean batch loss of each epoch.

    The input model is left untouched, and two calls with the same ``cfg.seed``
    produce bit-identical results.
    """
    xb, y = _check_labels(model, x, y)
    out = model.copy()
    rng = make_rng(cfg.seed)
    history = []
    for _ in range(cfg.epochs):
        losses = []
        for idx in iterate_minibatches(len(y), cfg.batch_size, rng):
            g = backward(out, xb[idx], y[idx], cfg.l2_penalty)
            sgd_step(out, g, cfg.learning_rate)
            losses.append(g.loss)
        history.append(float(np.mean(losses)))
    for w in out.weights:
        check_finite(w, "trained weights")
    return out, history


def accuracy(model: DenseModel, x, y) -> float:
    """Percentage of samples whose argmax class equals the label (ties -> lowest index)."""
    xb, y = _check_labels(model, x, y)
    return 100.0 * float(np.mean(predict(model, xb) == y))


def same_weights(a: DenseModel, b: DenseModel) -> bool:
    """Bit-level equality of architecture and every parameter array."""
    if a.arch != b.arch:
        return False
    pairs = list(zip(a.weights, b.weights)) + list(zip(a.biases, b.biases))
    return all(p.shape == q.shape and p.tobytes() == q.tobytes() for p, q in pairs)


__all__ = [
    "DEFAULT_ARCH", "DenseModel", "TrainConfig", "Gradients", "param_count", "init_model",
    "zeros_model", "forward", "logits", "predict", "loss", "backward", "sgd_step", "train",
    "accuracy", "same_weights",
]
