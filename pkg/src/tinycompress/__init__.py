"""Pruning, weight clustering and quantization for small feedforward classifiers,
with a byte-exact model container and a fault-detection benchmark harness."""
from .compress import (CompressedModel, apply_pipeline, cluster, cluster_finetune, prune, quantize,
                       reconstruct)
from .nn import DEFAULT_ARCH, DenseModel, TrainConfig, accuracy, forward, init_model, train

__version__ = "0.1.0"

__all__ = [
    "CompressedModel", "apply_pipeline", "cluster", "cluster_finetune", "prune", "quantize",
    "reconstruct", "DEFAULT_ARCH", "DenseModel", "TrainConfig", "accuracy", "forward",
    "init_model", "train",
]
