"""The seven prune/cluster/quantize combinations, always run in P -> C -> Q order."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..nn import DenseModel
from .cluster import ClusterConfig, cluster, cluster_finetune
from .prune import PruneConfig, prune
from .quantize import QuantConfig, quantize
from .storage import CompressedModel

STAGE_ORDER = "PCQ"
PIPELINES = ("P", "C", "Q", "PC", "PQ", "CQ", "PCQ")


def normalize_pipeline(stages) -> str:
    """Canonical stage string, e.g. ``"qp"`` or ``["C", "P"]`` -> ``"PQ"`` / ``"PC"``."""
    s = {str(c).upper() for c in stages}
    if not s or not s <= set(STAGE_ORDER):
        raise ValueError(f"pipeline must be a nonempty subset of P, C, Q; got {stages!r}")
    return "".join(c for c in STAGE_ORDER if c in s)


@dataclass
class CompressionConfig:
    """Per-stage settings. Defaults are calibrated to the storage format, not taken from data."""

    prune: PruneConfig = field(default_factory=lambda: PruneConfig(target_sparsity=0.77))
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    quant: QuantConfig = field(default_factory=QuantConfig)
    finetune_batch_size: int = 64
    finetune_l2_penalty: float = 1e-4


def apply_pipeline(model: DenseModel, pipeline, cfg: CompressionConfig | None = None,
                   data=None) -> CompressedModel:
    """Compress ``model`` with the given stage subset.

    ``data`` is an ``(x, y)`` training pair, needed only when clustering with
    ``finetune_epochs > 0``. When clustering and quantization are combined the
    quantizer acts on the codebooks.
    """
    cfg = cfg or CompressionConfig()
    stages = normalize_pipeline(pipeline)
    cm = CompressedModel.from_dense(model)
    if "P" in stages:
        cm, _ = prune(model, cfg.prune)
    if "C" in stages:
        cm = cluster(cm, cfg.cluster)
        if cfg.cluster.finetune_epochs:
            if data is None:
                raise ValueError("cluster fine-tuning needs training data")
            x, y = data
            cm = cluster_finetune(cm, x, y, cfg.cluster.finetune_epochs, cfg.cluster.finetune_lr,
                                  cfg.finetune_batch_size, cfg.cluster.seed, cfg.finetune_l2_penalty)
    if "Q" in stages:
        cm = quantize(cm, cfg.quant)
    cm.stages = stages
    cm.provenance["pipeline"] = stages
    return cm
