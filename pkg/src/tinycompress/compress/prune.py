"""Magnitude pruning into CSR storage."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..linalg import DTYPE
from ..nn import DenseModel
from .storage import CompressedLayer, CompressedModel, reconstruct


@dataclass(frozen=True)
class PruneConfig:
    """Either an absolute ``threshold`` or a per-layer ``target_sparsity``, never both."""

    threshold: Optional[float] = None
    target_sparsity: Optional[float] = None

    def __post_init__(self):
        if (self.threshold is None) == (self.target_sparsity is None):
            raise ValueError("set exactly one of threshold / target_sparsity")
        if self.threshold is not None and not self.threshold >= 0:
            raise ValueError("threshold must be nonnegative")
        if self.target_sparsity is not None and not 0 <= self.target_sparsity < 1:
            raise ValueError("target_sparsity must lie in [0, 1); 1 would empty the network")

    @property
    def mode(self) -> str:
        return "threshold" if self.threshold is not None else "sparsity"


def prune_mask(w: np.ndarray, cfg: PruneConfig) -> np.ndarray:
    """Boolean keep-mask for one weight matrix."""
    a = np.abs(np.asarray(w, dtype=DTYPE))
    if cfg.threshold is not None:
        return (a >= DTYPE(cfg.threshold)) & (a > 0)
    flat = a.ravel()
    n_keep = flat.size - int(round(cfg.target_sparsity * flat.size))
    keep = np.zeros(flat.size, dtype=bool)
    # stable sort: among equal magnitudes the lower flat index survives
    keep[np.argsort(-flat, kind="stable")[:n_keep]] = True
    return keep.reshape(a.shape)


def csr_from_mask(w: np.ndarray, mask: np.ndarray, bias: np.ndarray) -> CompressedLayer:
    rows, cols = mask.shape
    row_ptr = np.zeros(rows + 1, dtype=np.uint32)
    np.cumsum(mask.sum(axis=1), out=row_ptr[1:])
    col_idx = np.nonzero(mask)[1].astype(np.uint16 if cols <= 1 << 16 else np.uint32)
    return CompressedLayer(
        rows, cols, np.array(bias, dtype=DTYPE),
        row_ptr=row_ptr, col_idx=col_idx, values=np.asarray(w, dtype=DTYPE)[mask].copy(),
    )


def prune(model, cfg: PruneConfig) -> tuple[CompressedModel, list[np.ndarray]]:
    """Drop small-magnitude weights; survivors keep their exact values, biases are untouched.

    Returns the sparse model and one keep-mask per layer.
    """
    dense = model if isinstance(model, DenseModel) else reconstruct(model)
    layers, masks = [], []
    for w, b in zip(dense.weights, dense.biases):
        mask = prune_mask(w, cfg)
        masks.append(mask)
        layers.append(csr_from_mask(w, mask, b))
    cm = CompressedModel(dense.arch, layers, stages="P")
    cm.provenance["prune"] = {"threshold": cfg.threshold, "target_sparsity": cfg.target_sparsity}
    return cm, masks
