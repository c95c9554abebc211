"""The ``.tcmp`` container for dense and compressed models.

Everything is little-endian. The measured length of :func:`encode` is the
package's definition of model size. Field-level layout is documented in
``docs/FORMAT.md``; in short::

    magic "TCMP" | version u16 | body_len u32 | body | crc32(body) u32

    body = model_type u8 | stages u8 | n_sizes u16 | sizes u16[n_sizes] | layer records

    layer record = tag u8 | bias f32[rows] | [sparse part] | value part

Packed integer arrays are LSB-first and padded with zero bits to a byte boundary
at the end of each array, never per row.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compress.storage import (CLUSTERED, KIND_NAMES, QUANTIZED, SPARSE, CompressedLayer,
                               CompressedModel, QuantParams)
from .nn import DenseModel

MAGIC = b"TCMP"
VERSION = 1
HEADER = struct.Struct("<4sHI")
CRC = struct.Struct("<I")
U16_MAX = 0xFFFF

MODEL_DENSE, MODEL_COMPRESSED = 0, 1
_STAGE_BITS = {"P": 1, "C": 2, "Q": 4}


class ModelFormatError(ValueError):
    pass


class FormatCapacityError(ModelFormatError):
    """The model does not fit the format's fixed-width fields."""


class DecodeError(ModelFormatError):
    pass


class BadMagicError(DecodeError):
    pass


class UnsupportedVersionError(DecodeError):
    pass


class TruncatedError(DecodeError):
    pass


class ChecksumError(DecodeError):
    pass


class CorruptCodeError(DecodeError):
    """A cluster index, column index or code points outside its valid range."""


class MalformedError(DecodeError):
    """Checksum is fine but the content is structurally inconsistent."""


def bit_width(n: int) -> int:
    """Bits needed to address ``n`` distinct values, i.e. ``ceil(log2 n)`` (0 for n <= 1)."""
    return max(int(n) - 1, 0).bit_length()


def packed_nbytes(count: int, width: int) -> int:
    return (count * width + 7) // 8


def pack_bits(values, width: int) -> bytes:
    v = np.asarray(values, dtype=np.uint64).ravel()
    if width == 0 or v.size == 0:
        return b""
    if v.max() >> np.uint64(width):
        raise FormatCapacityError(f"value {int(v.max())} does not fit in {width} bits")
    bits = (v[:, None] >> np.arange(width, dtype=np.uint64)) & np.uint64(1)
    return np.packbits(bits.astype(np.uint8).ravel(), bitorder="little").tobytes()


def unpack_bits(buf, width: int, count: int) -> np.ndarray:
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.uint32)
    raw = np.frombuffer(buf, dtype=np.uint8)
    bits = np.unpackbits(raw, count=count * width, bitorder="little").reshape(count, width)
    return (bits.astype(np.uint32) << np.arange(width, dtype=np.uint32)).sum(axis=1, dtype=np.uint32)


# -- encoding ---------------------------------------------------------------------------


def _f32(a) -> bytes:
    return np.asarray(a, dtype="<f4").tobytes()


def _stage_flags(stages: str) -> int:
    return sum(_STAGE_BITS[s] for s in stages)


def encode_layer(layer: CompressedLayer) -> bytes:
    layer.validate()
    out = bytearray([layer.flags])
    out += _f32(layer.bias)
    n = layer.n_stored
    if layer.is_sparse:
        out += struct.pack("<I", n)
        out += np.asarray(layer.row_ptr, dtype="<u4").tobytes()
        if layer.flags == SPARSE:
            out += np.asarray(layer.col_idx, dtype="<u2").tobytes()
        else:
            out += pack_bits(layer.col_idx, bit_width(layer.cols))
    if layer.is_clustered:
        k = layer.n_clusters
        out += struct.pack("<I", k)
        if layer.is_quantized:
            q = layer.quant
            out += struct.pack("<Bff", q.bits, q.minimum, q.scale)
            out += pack_bits(layer.codes, q.bits)
        else:
            out += _f32(layer.codebook)
        out += pack_bits(layer.indices, bit_width(k))
    elif layer.is_quantized:
        q = layer.quant
        out += struct.pack("<Bff", q.bits, q.minimum, q.scale)
        out += pack_bits(layer.codes, q.bits)
    else:
        out += _f32(layer.values)
    return bytes(out)


def _as_compressed(model) -> tuple[int, CompressedModel]:
    if isinstance(model, DenseModel):
        return MODEL_DENSE, CompressedModel.from_dense(model)
    return MODEL_COMPRESSED, model


def encode(model) -> bytes:
    """Serialize a :class:`DenseModel` or :class:`CompressedModel` deterministically."""
    model_type, cm = _as_compressed(model)
    if any(not 0 <= a <= U16_MAX for a in cm.arch) or len(cm.arch) > U16_MAX:
        raise FormatCapacityError("layer sizes must fit in 16 bits")
    body = bytearray(struct.pack("<BBH", model_type, _stage_flags(cm.stages), len(cm.arch)))
    body += np.asarray(cm.arch, dtype="<u2").tobytes()
    for layer in cm.layers:
        body += encode_layer(layer)
    return HEADER.pack(MAGIC, VERSION, len(body)) + bytes(body) + CRC.pack(zlib.crc32(body))


def size_bytes(model) -> int:
    return len(encode(model))


# -- decoding ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.buf):
            raise MalformedError("record runs past the end of the body")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(size * count), dtype=dtype, count=count).copy()

    def packed(self, width: int, count: int) -> np.ndarray:
        return unpack_bits(self.take(packed_nbytes(count, width)), width, count)


def _finite(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise MalformedError(f"{what} contains NaN or Inf")
    return a.astype(np.float32)


def _read_quant(r: _Reader) -> QuantParams:
    bits, minimum, scale = r.unpack("<Bff")
    if not 1 <= bits <= 16 or not np.isfinite(minimum) or not (np.isfinite(scale) and scale > 0):
        raise MalformedError("invalid quantization parameters")
    return QuantParams(bits, minimum, scale)


def _code_dtype(width: int):
    return np.uint8 if width <= 8 else np.uint16 if width <= 16 else np.uint32


def _decode_layer(r: _Reader, rows: int, cols: int) -> CompressedLayer:
    (tag,) = r.unpack("<B")
    if tag not in KIND_NAMES:
        raise MalformedError(f"unknown storage tag {tag}")
    layer = CompressedLayer(rows, cols, _finite(r.array("<f4", rows), "bias"))
    n = rows * cols
    if tag & SPARSE:
        (n,) = r.unpack("<I")
        if n > rows * cols:
            raise MalformedError("more nonzeros than matrix positions")
        row_ptr = r.array("<u4", rows + 1).astype(np.uint32)
        if row_ptr[0] != 0 or row_ptr[-1] != n or np.any(np.diff(row_ptr.astype(np.int64)) < 0):
            raise MalformedError("inconsistent row pointers")
        if tag == SPARSE:
            col_idx = r.array("<u2", n).astype(np.uint16)
        else:
            col_idx = r.packed(bit_width(cols), n).astype(np.uint16)
        if n and col_idx.max() >= cols:
            raise CorruptCodeError("column index out of range")
        # columns must be strictly increasing inside each row
        starts = np.zeros(n, dtype=bool)
        starts[row_ptr[:-1][row_ptr[:-1] < n].astype(np.int64)] = True
        if n > 1 and np.any((np.diff(col_idx.astype(np.int64)) <= 0) & ~starts[1:]):
            raise MalformedError("column indices not strictly increasing within a row")
        layer.row_ptr, layer.col_idx = row_ptr, col_idx
    if tag & CLUSTERED:
        (k,) = r.unpack("<I")
        if k < 1 or k > max(n, 1):
            raise MalformedError(f"implausible codebook size {k}")
        if tag & QUANTIZED:
            layer.quant = _read_quant(r)
            layer.codes = r.packed(layer.quant.bits, k).astype(_code_dtype(layer.quant.bits))
        else:
            layer.codebook = _finite(r.array("<f4", k), "codebook")
        indices = r.packed(bit_width(k), n)
        if n and indices.max() >= k:
            raise CorruptCodeError(f"cluster index {int(indices.max())} >= codebook size {k}")
        layer.indices = indices.astype(_code_dtype(bit_width(k)))
    elif tag & QUANTIZED:
        layer.quant = _read_quant(r)
        layer.codes = r.packed(layer.quant.bits, n).astype(_code_dtype(layer.quant.bits))
    else:
        layer.values = _finite(r.array("<f4", n), "weights")
    return layer


def decode(data: bytes):
    """Inverse of :func:`encode`. Every kind of damage raises a :class:`DecodeError` subclass."""
    data = bytes(data)
    if len(data) < HEADER.size:
        raise TruncatedError("file shorter than its header")
    magic, version, body_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported format version {version}")
    expected = HEADER.size + body_len + CRC.size
    if len(data) < expected:
        raise TruncatedError(f"expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise MalformedError(f"{len(data) - expected} unexpected trailing bytes")
    body = data[HEADER.size:HEADER.size + body_len]
    (crc,) = CRC.unpack_from(data, HEADER.size + body_len)
    if zlib.crc32(body) != crc:
        raise ChecksumError("checksum mismatch")

    r = _Reader(body)
    model_type, stage_flags, n_sizes = r.unpack("<BBH")
    if model_type not in (MODEL_DENSE, MODEL_COMPRESSED) or stage_flags > 7:
        raise MalformedError("invalid model type or stage flags")
    arch = tuple(int(a) for a in r.array("<u2", n_sizes))
    layers = [_decode_layer(r, arch[i + 1], arch[i]) for i in range(max(len(arch) - 1, 0))]
    if r.pos != len(body):
        raise MalformedError("unused bytes at the end of the body")
    stages = "".join(s for s, bit in _STAGE_BITS.items() if stage_flags & bit)
    if model_type == MODEL_DENSE:
        if stages or any(layer.flags for layer in layers):
            raise MalformedError("dense model file contains compressed layers")
        return DenseModel(arch, [l.values.reshape(l.shape) for l in layers], [l.bias for l in layers])
    cm = CompressedModel(arch, layers, stages)
    for layer in layers:
        layer.validate()
    return cm


def save(model, path) -> int:
    data = encode(model)
    Path(path).write_bytes(data)
    return len(data)


def load(path):
    return decode(Path(path).read_bytes())


@dataclass
class LayerReport:
    index: int
    shape: tuple[int, int]
    kind: str
    stored: int
    nonzeros: int
    codebook: int
    bits: int
    record_bytes: int


def describe(model) -> list[LayerReport]:
    """Per-layer storage summary; record sizes add up to the file size minus fixed overhead."""
    _, cm = _as_compressed(model)
    out = []
    for i, layer in enumerate(cm.layers):
        out.append(LayerReport(
            i, layer.shape, layer.kind, layer.n_stored,
            int(np.count_nonzero(layer.to_dense())), layer.n_clusters,
            layer.quant.bits if layer.quant else 32, len(encode_layer(layer)),
        ))
    return out
