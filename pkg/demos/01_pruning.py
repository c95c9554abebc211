"""Magnitude pruning on one fault detector.

Trains a detector for fault 6 on synthetic process data, then sweeps the
per-layer sparsity and reports how the file size and test accuracy move.
Pruning is applied without retraining, so accuracy is the weak point here.

    python demos/01_pruning.py
"""
import numpy as np

from tinycompress import accuracy, init_model, modelfmt, prune, reconstruct, train
from tinycompress.compress import PruneConfig
from tinycompress.data import make_binary_task, synth_te
from tinycompress.nn import TrainConfig

FAULT = 6

ds = synth_te(seed=0, samples_per_fault=600, faults=[0, FAULT])
task = make_binary_task(ds, FAULT, split_seed=1)
model, history = train(init_model(seed=2), *task.train, TrainConfig(epochs=20, seed=3))
base_size = modelfmt.size_bytes(model)
base_acc = accuracy(model, *task.test)
print(f"fault {FAULT}: {len(task.y_train)} training rows, final loss {history[-1]:.4f}")
print(f"dense model {base_size} bytes, test accuracy {base_acc:.1f}%\n")

# Where do the weights sit? Most are small, which is what pruning bets on.
all_w = np.concatenate([w.ravel() for w in model.weights])
print("weight magnitude quantiles:",
      ", ".join(f"q{q}={np.quantile(np.abs(all_w), q / 100):.4f}" for q in (25, 50, 75, 95)))

print(f"\n{'sparsity':>8} {'bytes':>8} {'rate %':>7} {'acc %':>6}")
for s in (0.0, 0.3, 0.5, 0.7, 0.77, 0.9):
    cm, masks = prune(model, PruneConfig(target_sparsity=s))
    size = modelfmt.size_bytes(cm)
    acc = accuracy(reconstruct(cm), *task.test)
    print(f"{s:8.2f} {size:8d} {100 * (1 - size / base_size):7.1f} {acc:6.1f}")

# A plain sparse layer pays 6 bytes per kept weight (u16 column + f32 value),
# so below 1/3 density it beats the 4-byte dense encoding.
cm, _ = prune(model, PruneConfig(target_sparsity=0.77))
print("\nper-layer records at 77% sparsity:")
for r in modelfmt.describe(cm):
    print(f"  layer {r.index} {r.shape[0]}x{r.shape[1]} kept {r.stored} -> {r.record_bytes} bytes")
