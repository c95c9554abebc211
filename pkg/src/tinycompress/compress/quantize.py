"""Per-layer affine (min/scale) quantization of weights or codebooks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import DTYPE
from ..nn import DenseModel
from .storage import CompressedLayer, CompressedModel, QuantParams


@dataclass(frozen=True)
class QuantConfig:
    bits: int = 8

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ValueError("bits must be in 1..16")


def _code_dtype(bits: int):
    return np.uint8 if bits <= 8 else np.uint16


def quantize_array(values, bits: int) -> tuple[QuantParams, np.ndarray]:
    """Codes for ``values`` on a uniform grid from their min to their max.

    ``scale = (max - min) / (2**bits - 1)`` (1.0 for a constant array) and
    ``code = round((w - min) / scale)``, so every value is reproduced to within
    ``scale / 2``. Codes are computed against the float32-rounded parameters
    that actually get stored.
    """
    v = np.asarray(values, dtype=DTYPE).ravel()
    if v.size == 0:
        raise ValueError("cannot quantize an empty array")
    lo, hi = float(v.min()), float(v.max())
    levels = (1 << bits) - 1
    scale = (hi - lo) / levels
    if not np.float32(scale) > 0:
        scale = 1.0
    params = QuantParams(bits, lo, scale)
    codes = np.rint((v.astype(np.float64) - params.minimum) / params.scale)
    codes = np.clip(codes, 0, levels).astype(_code_dtype(bits))
    return params, codes


def dequantize_exact(params: QuantParams, codes) -> np.ndarray:
    """Float64 dequantization, before the final float32 rounding."""
    return params.minimum + np.asarray(codes, dtype=np.float64) * params.scale


def quantize_layer(layer: CompressedLayer, cfg: QuantConfig) -> CompressedLayer:
    base = dict(rows=layer.rows, cols=layer.cols, bias=layer.bias.copy(),
                row_ptr=layer.row_ptr, col_idx=layer.col_idx)
    if layer.is_clustered:
        # indices are already small integers; only the codebook needs fewer bits
        params, codes = quantize_array(layer.codebook, cfg.bits)
        return CompressedLayer(**base, indices=layer.indices, quant=params, codes=codes)
    params, codes = quantize_array(layer.values, cfg.bits)
    return CompressedLayer(**base, quant=params, codes=codes)


def quantize(model, cfg: QuantConfig) -> CompressedModel:
    if isinstance(model, DenseModel):
        model = CompressedModel.from_dense(model)
    if any(layer.is_quantized for layer in model.layers):
        raise ValueError("model is already quantized")
    out = CompressedModel(model.arch, [quantize_layer(l, cfg) for l in model.layers],
                          stages=model.stages + "Q", provenance=dict(model.provenance))
    out.provenance["quantize"] = {"bits": cfg.bits}
    return out
