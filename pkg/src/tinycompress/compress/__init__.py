from .cluster import (ClusterConfig, DegenerateLayerError, KMeansResult, cluster, cluster_finetune,
                      group_gradient_sums, kmeans_1d)
from .pipeline import PIPELINES, CompressionConfig, apply_pipeline, normalize_pipeline
from .prune import PruneConfig, prune, prune_mask
from .quantize import QuantConfig, dequantize_exact, quantize, quantize_array
from .storage import (KIND_NAMES, CompressedLayer, CompressedModel, IntegrityError, QuantParams,
                      compressed_accuracy, compressed_forward, reconstruct)

__all__ = [
    "ClusterConfig", "DegenerateLayerError", "KMeansResult", "cluster", "cluster_finetune",
    "group_gradient_sums", "kmeans_1d", "PIPELINES", "CompressionConfig", "apply_pipeline",
    "normalize_pipeline", "PruneConfig", "prune", "prune_mask", "QuantConfig", "dequantize_exact",
    "quantize", "quantize_array", "KIND_NAMES", "CompressedLayer", "CompressedModel",
    "IntegrityError", "QuantParams", "compressed_accuracy", "compressed_forward", "reconstruct",
]
