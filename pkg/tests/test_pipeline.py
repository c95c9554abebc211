import numpy as np
import pytest
from conftest import random_model

from tinycompress import modelfmt
from tinycompress.compress import (PIPELINES, ClusterConfig, CompressionConfig, IntegrityError, PruneConfig,
                                   apply_pipeline, compressed_accuracy, compressed_forward, normalize_pipeline,
                                   prune, reconstruct)
from tinycompress.nn import accuracy, forward, same_weights

NO_FINETUNE = CompressionConfig(cluster=ClusterConfig(clusters_per_layer=128, finetune_epochs=0))


def toy_data(n=40, d=6, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d)).astype(np.float32)
    return x, (x[:, 0] > 0).astype(int)


@pytest.mark.parametrize("given,canonical", [("qcp", "PCQ"), ("QP", "PQ"), (["C"], "C"), ("cq", "CQ")])
def test_canonical_order(given, canonical):
    assert normalize_pipeline(given) == canonical


@pytest.mark.parametrize("bad", ["", "X", "PX"])
def test_bad_pipeline(bad):
    with pytest.raises(ValueError):
        normalize_pipeline(bad)


def test_seven_pipelines():
    assert len(PIPELINES) == 7 and len(set(PIPELINES)) == 7


def test_prune_only_pipeline_equals_prune():
    m = random_model((6, 10, 2), seed=0)
    cfg = CompressionConfig(prune=PruneConfig(target_sparsity=0.6))
    assert apply_pipeline(m, "P", cfg).same_as(prune(m, cfg.prune)[0])


@pytest.mark.parametrize("pipeline", PIPELINES)
def test_every_subset_runs_and_reconstructs(pipeline):
    m = random_model((6, 10, 8, 2), seed=1)
    data = toy_data()
    cfg = CompressionConfig(cluster=ClusterConfig(clusters_per_layer=4, finetune_epochs=2))
    cm = apply_pipeline(m, pipeline, cfg, data=data)
    assert cm.stages == pipeline
    rec = reconstruct(cm)
    assert rec.arch == m.arch and all(w.shape == v.shape for w, v in zip(rec.weights, m.weights))
    expected_kind = {"P": "Sparse", "C": "Clustered", "Q": "Quantized"}
    kind = "".join(expected_kind[s] for s in pipeline)
    assert all(k == kind for k in cm.kinds)
    # two evaluation paths agree
    x, y = data
    assert np.allclose(compressed_forward(cm, x), forward(rec, x), atol=1e-6)
    assert compressed_accuracy(cm, x, y) == accuracy(rec, x, y)
    assert modelfmt.decode(modelfmt.encode(cm)).same_as(cm)


def test_pipeline_does_not_modify_its_input():
    m = random_model((6, 10, 2), seed=2)
    before = m.copy()
    apply_pipeline(m, "PCQ", CompressionConfig(cluster=ClusterConfig(clusters_per_layer=4, finetune_epochs=1)),
                   data=toy_data())
    assert same_weights(m, before)


def test_threshold_zero_prune_keeps_accuracy_exactly():
    m = random_model((6, 10, 2), seed=3)
    x, y = toy_data(seed=3)
    cm = apply_pipeline(m, "P", CompressionConfig(prune=PruneConfig(threshold=0.0)))
    assert same_weights(reconstruct(cm), m)
    assert accuracy(reconstruct(cm), x, y) == accuracy(m, x, y)


def test_finetune_needs_data():
    with pytest.raises(ValueError):
        apply_pipeline(random_model((2, 3, 2)), "C", CompressionConfig(cluster=ClusterConfig(clusters_per_layer=2)))


def test_corrupt_index_is_detected():
    cm = apply_pipeline(random_model((4, 4, 2)), "C", CompressionConfig(
        cluster=ClusterConfig(clusters_per_layer=3, finetune_epochs=0)))
    cm.layers[0].indices = cm.layers[0].indices.copy()
    cm.layers[0].indices[0] = 7
    with pytest.raises(IntegrityError):
        reconstruct(cm)


def test_default_model_sizes_are_ordered(default_model):
    size = {p: modelfmt.size_bytes(apply_pipeline(default_model, p, NO_FINETUNE)) for p in ("Q", "CQ", "PCQ")}
    assert size["PCQ"] <= size["CQ"] <= size["Q"]


def test_all_three_stages_land_in_band(default_model):
    base = modelfmt.size_bytes(default_model)
    rate = 100 * (1 - modelfmt.size_bytes(apply_pipeline(default_model, "PCQ", NO_FINETUNE)) / base)
    assert 85.0 <= rate <= 94.0


def test_provenance_lists_stages():
    cm = apply_pipeline(random_model((4, 4, 2)), "PQ")
    assert cm.provenance["pipeline"] == "PQ"
    assert {"prune", "quantize"} <= set(cm.provenance)
