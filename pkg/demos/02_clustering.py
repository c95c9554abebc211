"""Weight sharing with per-layer k-means, with and without codebook fine-tuning.

After clustering, each layer stores a small float codebook and one short index
per weight. Fine-tuning then moves each centroid by the summed gradient of
the weights that share it.

    python demos/02_clustering.py
"""
from tinycompress import accuracy, cluster, cluster_finetune, init_model, modelfmt, reconstruct, train
from tinycompress.compress import ClusterConfig, CompressedModel
from tinycompress.data import make_binary_task, synth_te
from tinycompress.nn import TrainConfig

FAULT = 6

ds = synth_te(seed=0, samples_per_fault=600, faults=[0, FAULT])
task = make_binary_task(ds, FAULT, split_seed=1)
model, _ = train(init_model(seed=2), *task.train, TrainConfig(epochs=20, seed=3))
base_size = modelfmt.size_bytes(model)
base_acc = accuracy(model, *task.test)
print(f"fault {FAULT}: dense {base_size} bytes, test accuracy {base_acc:.1f}%\n")

print(f"{'k':>4} {'bytes':>8} {'rate %':>7} {'acc %':>6} {'tuned %':>8}")
for k in (4, 16, 64, 128):
    cm = cluster(CompressedModel.from_dense(model), ClusterConfig(clusters_per_layer=k, seed=4))
    acc = accuracy(reconstruct(cm), *task.test)
    tuned = cluster_finetune(cm, *task.train, epochs=10, lr=0.005, seed=5)
    tuned_acc = accuracy(reconstruct(tuned), *task.test)
    size = modelfmt.size_bytes(tuned)  # fine-tuning never changes the size
    print(f"{k:4d} {size:8d} {100 * (1 - size / base_size):7.1f} {acc:6.1f} {tuned_acc:8.1f}")

# With very few centroids each one sums thousands of member gradients, so the
# same learning rate that helps at k=16 can overshoot at k=4.

# Sharing is visible in the reconstructed weights: one distinct value per centroid.
dense = reconstruct(cm)
print("\ndistinct values per layer:", [len(set(w.ravel().tolist())) for w in dense.weights])
