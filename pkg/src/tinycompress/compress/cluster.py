"""Weight sharing: per-layer 1-D k-means codebooks and codebook fine-tuning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import DTYPE, make_rng
from ..nn import DenseModel, backward, iterate_minibatches
from .storage import CompressedLayer, CompressedModel, reconstruct


class DegenerateLayerError(ValueError):
    """A layer has no weights left to cluster."""


@dataclass(frozen=True)
class ClusterConfig:
    clusters_per_layer: int = 128
    max_iters: int = 100
    seed: int = 0
    finetune_epochs: int = 15
    finetune_lr: float = 0.005

    def __post_init__(self):
        if self.clusters_per_layer < 1:
            raise ValueError("clusters_per_layer must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.finetune_epochs < 0 or not self.finetune_lr > 0:
            raise ValueError("finetune_epochs must be >= 0 and finetune_lr > 0")


@dataclass
class KMeansResult:
    centroids: np.ndarray  # float32, ascending
    labels: np.ndarray
    objective: list[float]  # within-cluster sum of squares after each assignment
    iterations: int


def _assign(values: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # centroids ascending; a value on a midpoint goes to the lower cluster
    return np.searchsorted((centroids[1:] + centroids[:-1]) / 2, values, side="left")


def _init_centroids(v: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    s = np.sort(v)
    c = np.unique(s[np.round(np.linspace(0, len(s) - 1, k)).astype(np.int64)])
    while len(c) < k:
        # duplicates among the quantile picks: add the value farthest from its nearest centroid
        d = np.abs(v - c[_assign(v, c)])
        far = np.flatnonzero(d == d.max())
        c = np.sort(np.append(c, v[rng.choice(far)]))
    return c


def kmeans_1d(values, k: int, max_iters: int = 100, seed=0) -> KMeansResult:
    """Lloyd iterations on scalars, seeded from ``k`` evenly spaced quantiles.

    ``k`` is clamped to the number of distinct values. An empty cluster is
    re-seeded at the value farthest from its current centroid. Stops when the
    assignment no longer changes.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise DegenerateLayerError("nothing to cluster")
    k = min(int(k), len(np.unique(v)))
    rng = make_rng(seed)
    c = _init_centroids(v, k, rng)
    labels = _assign(v, c)
    objective = [float(np.sum((v - c[labels]) ** 2))]
    it = 0
    for it in range(1, max_iters + 1):
        counts = np.bincount(labels, minlength=k)
        sums = np.bincount(labels, weights=v, minlength=k)
        nonempty = counts > 0
        c = c.copy()
        c[nonempty] = sums[nonempty] / counts[nonempty]
        for j in np.flatnonzero(~nonempty):
            d = np.abs(v - c[labels])
            d[np.isin(v, c)] = -1.0
            c[j] = v[int(np.argmax(d))]
        c = np.sort(c)
        new_labels = _assign(v, c)
        objective.append(float(np.sum((v - c[new_labels]) ** 2)))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return KMeansResult(c.astype(DTYPE), labels, objective, it)


def _index_dtype(k: int):
    return np.uint8 if k <= 1 << 8 else np.uint16 if k <= 1 << 16 else np.uint32


def cluster_layer(layer: CompressedLayer, cfg: ClusterConfig) -> CompressedLayer:
    vals = layer.stored_values()
    if vals.size == 0:
        raise DegenerateLayerError("layer has no surviving weights to cluster")
    km = kmeans_1d(vals, cfg.clusters_per_layer, cfg.max_iters, cfg.seed)
    return CompressedLayer(
        layer.rows, layer.cols, layer.bias.copy(),
        row_ptr=layer.row_ptr, col_idx=layer.col_idx,
        codebook=km.centroids, indices=km.labels.astype(_index_dtype(len(km.centroids))),
    )


def cluster(model, cfg: ClusterConfig) -> CompressedModel:
    """Replace every stored weight by its cluster centroid; pruned positions stay pruned."""
    if isinstance(model, DenseModel):
        model = CompressedModel.from_dense(model)
    if any(layer.is_clustered or layer.is_quantized for layer in model.layers):
        raise ValueError("cluster expects dense or sparse float layers")
    out = CompressedModel(model.arch, [cluster_layer(l, cfg) for l in model.layers],
                          stages=model.stages + "C", provenance=dict(model.provenance))
    out.provenance["cluster"] = {"clusters_per_layer": cfg.clusters_per_layer,
                                 "max_iters": cfg.max_iters, "seed": cfg.seed}
    return out


def group_gradient_sums(layer: CompressedLayer, grad: np.ndarray, positions=None) -> np.ndarray:
    """Sum of the dense weight gradient over the members of each cluster."""
    if positions is None:
        positions = layer.positions()
    g = np.asarray(grad, dtype=np.float64).ravel()[positions]
    return np.bincount(layer.indices, weights=g, minlength=layer.n_clusters)


def cluster_finetune(model: CompressedModel, x, y, epochs: int, lr: float = 1e-3,
                     batch_size: int = 64, seed=0, l2_penalty: float = 0.0,
                     update_biases: bool = True) -> CompressedModel:
    """Train the shared centroids while keeping every cluster assignment fixed.

    Each step backpropagates through the reconstructed dense model, sums the
    weight gradient over each cluster's members and moves the centroid by
    ``-lr * sum``. Biases (stored dense) take ordinary SGD steps unless
    ``update_biases`` is false.
    """
    if not all(layer.is_clustered and not layer.is_quantized for layer in model.layers):
        raise ValueError("cluster_finetune needs float-codebook clustered layers")
    layers = [
        CompressedLayer(l.rows, l.cols, l.bias.copy(), row_ptr=l.row_ptr, col_idx=l.col_idx,
                        codebook=l.codebook.copy(), indices=l.indices)
        for l in model.layers
    ]
    out = CompressedModel(model.arch, layers, model.stages, dict(model.provenance))
    positions = [l.positions() for l in layers]
    x = np.asarray(x, dtype=DTYPE)
    y = np.asarray(y)
    rng = make_rng(seed)
    for _ in range(epochs):
        for idx in iterate_minibatches(len(y), batch_size, rng):
            g = backward(reconstruct(out), x[idx], y[idx], l2_penalty)
            for layer, pos, gw, gb in zip(layers, positions, g.weights, g.biases):
                sums = group_gradient_sums(layer, gw, pos)
                layer.codebook -= (lr * sums).astype(DTYPE)
                if update_biases:
                    layer.bias -= DTYPE(lr) * gb
    out.provenance["cluster_finetune"] = {"epochs": epochs, "lr": lr, "batch_size": batch_size}
    return out
