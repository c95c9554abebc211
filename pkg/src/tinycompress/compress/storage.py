"""Storage variants for compressed weight matrices and the models built from them.

A layer is described by three independent traits:

* **sparse**: only the surviving positions are stored, in CSR form
  (``row_ptr``, ``col_idx``);
* **clustered**: each stored position holds an index into a small codebook;
* **quantized**: real values are replaced by affine integer codes. For a
  clustered layer it is the codebook that gets quantized.

Their combinations give the eight kinds named in :data:`KIND_NAMES`. Biases are
always kept dense in float32.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse

from ..linalg import DTYPE, softmax
from ..nn import DenseModel

SPARSE, CLUSTERED, QUANTIZED = 1, 2, 4

KIND_NAMES = {
    0: "Dense",
    SPARSE: "Sparse",
    CLUSTERED: "Clustered",
    QUANTIZED: "Quantized",
    SPARSE | CLUSTERED: "SparseClustered",
    SPARSE | QUANTIZED: "SparseQuantized",
    CLUSTERED | QUANTIZED: "ClusteredQuantized",
    SPARSE | CLUSTERED | QUANTIZED: "SparseClusteredQuantized",
}


class IntegrityError(ValueError):
    """A compressed layer refers to a codebook entry or code that cannot exist."""


@dataclass(frozen=True)
class QuantParams:
    """Per-layer affine quantizer: ``value = minimum + code * scale``.

    Codes range over ``[0, 2**bits)``; code 0 is the layer minimum.
    """

    bits: int
    minimum: float
    scale: float

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ValueError(f"bits must be in 1..16, got {self.bits}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        # stored as float32 in the model file; normalise now so round-trips are exact
        object.__setattr__(self, "minimum", float(np.float32(self.minimum)))
        object.__setattr__(self, "scale", float(np.float32(self.scale)))

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def zero_point(self) -> int:
        """Integer code that real zero maps to (may fall outside the code range)."""
        return int(round(-self.minimum / self.scale))

    def dequantize(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes)
        if codes.size and (codes.min() < 0 or codes.max() >= self.levels):
            raise IntegrityError(f"quantized code outside [0, {self.levels})")
        return (self.minimum + codes.astype(np.float64) * self.scale).astype(DTYPE)


@dataclass
class CompressedLayer:
    rows: int
    cols: int
    bias: np.ndarray
    row_ptr: Optional[np.ndarray] = None
    col_idx: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    codebook: Optional[np.ndarray] = None
    indices: Optional[np.ndarray] = None
    quant: Optional[QuantParams] = None
    codes: Optional[np.ndarray] = None

    @classmethod
    def dense(cls, weights: np.ndarray, bias: np.ndarray) -> "CompressedLayer":
        w = np.asarray(weights, dtype=DTYPE)
        return cls(w.shape[0], w.shape[1], np.array(bias, dtype=DTYPE), values=w.ravel().copy())

    @property
    def is_sparse(self) -> bool:
        return self.row_ptr is not None

    @property
    def is_clustered(self) -> bool:
        return self.indices is not None

    @property
    def is_quantized(self) -> bool:
        return self.quant is not None

    @property
    def flags(self) -> int:
        return SPARSE * self.is_sparse | CLUSTERED * self.is_clustered | QUANTIZED * self.is_quantized

    @property
    def kind(self) -> str:
        return KIND_NAMES[self.flags]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def n_stored(self) -> int:
        """Number of weight positions that carry a value (all of them unless sparse)."""
        return int(self.row_ptr[-1]) if self.is_sparse else self.rows * self.cols

    @property
    def n_clusters(self) -> int:
        if not self.is_clustered:
            return 0
        return len(self.codes) if self.is_quantized else len(self.codebook)

    def centroids(self) -> np.ndarray:
        """Codebook values in float32 (dequantized if the codebook is quantized)."""
        if not self.is_clustered:
            raise ValueError(f"{self.kind} layer has no codebook")
        if self.is_quantized:
            return self.quant.dequantize(self.codes)
        return self.codebook

    def stored_values(self) -> np.ndarray:
        """Float32 value at every stored position, in storage order."""
        if self.is_clustered:
            cb = self.centroids()
            if self.indices.size and self.indices.max() >= len(cb):
                raise IntegrityError(f"cluster index >= codebook size {len(cb)}")
            return cb[self.indices]
        if self.is_quantized:
            return self.quant.dequantize(self.codes)
        return self.values

    def positions(self) -> np.ndarray:
        """Flat row-major offsets of the stored positions."""
        if not self.is_sparse:
            return np.arange(self.rows * self.cols)
        rows = np.repeat(np.arange(self.rows), np.diff(self.row_ptr.astype(np.int64)))
        return rows * self.cols + self.col_idx.astype(np.int64)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.rows * self.cols, dtype=bool)
        m[self.positions()] = True
        return m.reshape(self.rows, self.cols)

    def validate(self) -> None:
        n_reps = sum([self.values is not None, self.is_clustered, self.is_quantized and not self.is_clustered])
        if n_reps != 1:
            raise IntegrityError("layer must carry exactly one value representation")
        if self.bias.shape != (self.rows,):
            raise IntegrityError("bias length does not match row count")
        if self.is_sparse:
            rp = self.row_ptr.astype(np.int64)
            if len(rp) != self.rows + 1 or rp[0] != 0 or np.any(np.diff(rp) < 0):
                raise IntegrityError("malformed row pointer array")
            if len(self.col_idx) != rp[-1]:
                raise IntegrityError("column index count does not match row pointers")
            if self.col_idx.size and self.col_idx.max() >= self.cols:
                raise IntegrityError("column index out of range")
        n = self.n_stored
        if self.is_clustered:
            if len(self.indices) != n:
                raise IntegrityError("cluster index count does not match stored positions")
            if self.is_quantized == (self.codebook is not None):
                raise IntegrityError("clustered layer needs either a float or a quantized codebook")
        elif self.is_quantized and len(self.codes) != n:
            raise IntegrityError("code count does not match stored positions")
        elif self.values is not None and len(self.values) != n:
            raise IntegrityError("value count does not match stored positions")
        self.stored_values()

    def to_dense(self) -> np.ndarray:
        self.validate()
        w = np.zeros(self.rows * self.cols, dtype=DTYPE)
        w[self.positions()] = self.stored_values()
        return w.reshape(self.rows, self.cols)

    def as_operator(self):
        """A matrix-like object for ``W @ h`` built straight from storage (CSR or dense)."""
        self.validate()
        vals = self.stored_values()
        if self.is_sparse:
            return scipy.sparse.csr_matrix(
                (vals, self.col_idx.astype(np.int64), self.row_ptr.astype(np.int64)),
                shape=self.shape,
            )
        return vals.reshape(self.shape)

    def same_as(self, other: "CompressedLayer") -> bool:
        """Bit-level equality of every stored array (integer arrays compare by value)."""
        return (
            self.shape == other.shape
            and self.quant == other.quant
            and all(
                _same_array(getattr(self, f), getattr(other, f))
                for f in ("bias", "row_ptr", "col_idx", "values", "codebook", "indices", "codes")
            )
        )


def _same_array(a, b) -> bool:
    if a is None or b is None:
        return a is b
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    if a.dtype.kind == "f" or b.dtype.kind == "f":
        return a.dtype == b.dtype and a.tobytes() == b.tobytes()
    return bool(np.array_equal(a, b))


@dataclass
class CompressedModel:
    arch: tuple[int, ...]
    layers: list[CompressedLayer]
    stages: str = ""
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.arch = tuple(int(a) for a in self.arch)
        if len(self.layers) != max(len(self.arch) - 1, 0):
            raise ValueError("layer count does not match the architecture")
        for i, layer in enumerate(self.layers):
            if layer.shape != (self.arch[i + 1], self.arch[i]):
                raise ValueError(f"layer {i} has shape {layer.shape}, architecture wants "
                                 f"{(self.arch[i + 1], self.arch[i])}")

    @classmethod
    def from_dense(cls, model: DenseModel) -> "CompressedModel":
        return cls(model.arch, [CompressedLayer.dense(w, b) for w, b in zip(model.weights, model.biases)])

    @property
    def kinds(self) -> list[str]:
        return [layer.kind for layer in self.layers]

    def same_as(self, other: "CompressedModel") -> bool:
        return (
            self.arch == other.arch
            and self.stages == other.stages
            and len(self.layers) == len(other.layers)
            and all(a.same_as(b) for a, b in zip(self.layers, other.layers))
        )


def reconstruct(model) -> DenseModel:
    """Dense float32 weights from any storage kind; raises :class:`IntegrityError` on bad codes."""
    if isinstance(model, DenseModel):
        return model.copy()
    return DenseModel(
        model.arch,
        [layer.to_dense() for layer in model.layers],
        [layer.bias.copy() for layer in model.layers],
    )


def compressed_forward(model: CompressedModel, x) -> np.ndarray:
    """Class probabilities computed from the stored representation, without densifying.

    Mirrors :func:`tinycompress.nn.forward` and exists as a second evaluation path.
    """
    h = np.atleast_2d(np.asarray(x, dtype=DTYPE))
    n = len(model.layers)
    for i, layer in enumerate(model.layers):
        op = layer.as_operator()
        z = np.asarray((op @ h.T).T, dtype=DTYPE) + layer.bias
        h = np.maximum(z, DTYPE(0)) if i < n - 2 else z
    probs = softmax(h, axis=1)
    return probs[0] if np.ndim(x) == 1 else probs


def compressed_accuracy(model: CompressedModel, x, y) -> float:
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("empty data")
    pred = np.argmax(compressed_forward(model, x), axis=1)
    return 100.0 * float(np.mean(pred == y))
