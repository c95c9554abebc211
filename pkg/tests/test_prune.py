import numpy as np
import pytest
from conftest import random_model
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tinycompress.compress import PruneConfig, prune, prune_mask, reconstruct
from tinycompress.nn import DenseModel, same_weights


def one_layer(w):
    w = np.asarray(w, np.float32)
    return DenseModel(w.shape[::-1], [w], [np.arange(w.shape[0], dtype=np.float32)])


def test_threshold_point_one_on_four_by_four():
    w = np.array([[0.50, -0.05, 0.10, 0.02],
                  [-0.30, 0.09, -0.11, 0.00],
                  [0.01, 0.70, -0.08, -0.25],
                  [0.15, -0.099, 0.40, 0.06]], np.float32)
    cm, (mask,) = prune(one_layer(w), PruneConfig(threshold=0.1))
    expected = np.where(np.abs(w) < np.float32(0.1), 0.0, w).astype(np.float32)
    assert np.array_equal(reconstruct(cm).weights[0], expected)
    assert mask.sum() == 8 and cm.layers[0].n_stored == 8
    assert cm.layers[0].kind == "Sparse"


def test_threshold_zero_keeps_everything():
    m = random_model((5, 7, 3), seed=1)
    cm, masks = prune(m, PruneConfig(threshold=0.0))
    assert all(mask.all() for mask in masks)
    assert same_weights(reconstruct(cm), m)


def test_threshold_zero_still_drops_exact_zeros():
    w = np.array([[0.0, 1.0], [-2.0, 0.0]], np.float32)
    cm, (mask,) = prune(one_layer(w), PruneConfig(threshold=0.0))
    assert mask.tolist() == [[False, True], [True, False]]


def test_target_sparsity_keeps_largest():
    w = np.random.default_rng(0).standard_normal((25, 40)).astype(np.float32)
    cm, (mask,) = prune(one_layer(w), PruneConfig(target_sparsity=0.8))
    assert mask.sum() == 200
    order = np.argsort(-np.abs(w).ravel())
    assert set(np.flatnonzero(mask.ravel())) == set(order[:200])


def test_sparsity_ties_resolved_by_position():
    w = np.ones((2, 2), np.float32)
    assert prune_mask(w, PruneConfig(target_sparsity=0.5)).ravel().tolist() == [True, True, False, False]


def test_config_validation():
    with pytest.raises(ValueError):
        PruneConfig(target_sparsity=1.0)
    with pytest.raises(ValueError):
        PruneConfig()
    with pytest.raises(ValueError):
        PruneConfig(threshold=0.1, target_sparsity=0.5)
    with pytest.raises(ValueError):
        PruneConfig(threshold=-1.0)


def test_biases_and_input_untouched():
    m = random_model((4, 6, 2), seed=3)
    before = m.copy()
    cm, _ = prune(m, PruneConfig(target_sparsity=0.9))
    assert same_weights(m, before)
    for layer, b in zip(cm.layers, m.biases):
        assert np.array_equal(layer.bias, b)


@given(arrays(np.float32, st.tuples(st.integers(1, 9), st.integers(1, 9)),
              elements=st.floats(-2, 2, width=32)),
       st.floats(0, 1.5))
def test_threshold_semantics_exact(w, thr):
    cm, (mask,) = prune(one_layer(w), PruneConfig(threshold=thr))
    a = np.abs(w)
    t = np.float32(thr)
    assert np.all(a[mask] >= t)
    assert np.all((a[~mask] < t) | (w[~mask] == 0))
    rec = reconstruct(cm).weights[0]
    assert rec[mask].tobytes() == w[mask].tobytes()
    assert np.all(rec[~mask] == 0)


@given(st.integers(1, 400), st.floats(0, 0.999))
def test_sparsity_count(n, s):
    w = np.random.default_rng(n).standard_normal((1, n)).astype(np.float32)
    mask = prune_mask(w, PruneConfig(target_sparsity=s))
    assert mask.sum() == n - round(s * n)
