"""8-bit affine quantization and what it looks like inside a .tcmp file.

Shows the quantizer parameters of one layer, the worst-case rounding error,
the byte breakdown reported by ``describe``, and how the decoder reacts to a
flipped bit.

    python demos/03_quantization_and_format.py
"""
import numpy as np

from tinycompress import apply_pipeline, init_model, modelfmt, quantize, reconstruct
from tinycompress.compress import QuantConfig

model = init_model(seed=7)
dense_bytes = modelfmt.encode(model)
print(f"dense file: {len(dense_bytes)} bytes, header {dense_bytes[:4]!r}")

for bits in (2, 4, 8, 12):
    qm = quantize(model, QuantConfig(bits=bits))
    err = max(float(np.abs(a - b).max()) for a, b in zip(model.weights, reconstruct(qm).weights))
    print(f"{bits:2d} bits: {modelfmt.size_bytes(qm):7d} bytes, max |error| {err:.2e}")

qm = quantize(model, QuantConfig(bits=8))
q = qm.layers[1].quant
print(f"\nlayer 1 quantizer: min {q.minimum:.5f}, scale {q.scale:.3e}, zero point {q.zero_point}")
err1 = float(np.abs(model.weights[1] - reconstruct(qm).weights[1]).max())
print(f"largest layer-1 error {err1:.3e}, half a step {q.scale / 2:.3e}")

# Composite pipelines: the column indices of a pruned layer are bit-packed.
pq = apply_pipeline(model, "PQ")
print(f"\n{'layer':>5} {'kind':<18} {'stored':>7} {'bits':>4} {'bytes':>7}")
for r in modelfmt.describe(pq):
    print(f"{r.index:>5} {r.kind:<18} {r.stored:>7} {r.bits:>4} {r.record_bytes:>7}")
print(f"PQ file {modelfmt.size_bytes(pq)} bytes, "
      f"rate {100 * (1 - modelfmt.size_bytes(pq) / len(dense_bytes)):.1f}%")

# Round trip is exact; corruption is caught by the checksum.
blob = modelfmt.encode(pq)
assert modelfmt.decode(blob).same_as(pq)
bad = bytearray(blob)
bad[len(bad) // 2] ^= 0x10
try:
    modelfmt.decode(bytes(bad))
except modelfmt.DecodeError as e:
    print(f"\nflipped one bit: {type(e).__name__}: {e}")
