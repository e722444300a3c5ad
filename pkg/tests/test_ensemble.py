import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taman.ensemble import ensemble_predict, ensemble_variant, prediction_weights, variant_weights
from taman.errors import ConfigError, ShapeError


def dirichlet_preds(seed, m=3, k=4):
    return np.random.default_rng(seed).dirichlet(np.ones(k), size=m)


def test_identical_classifiers_split_evenly():
    p = np.array([[0.3, 0.7], [0.3, 0.7]])
    np.testing.assert_allclose(prediction_weights(p), [0.5, 0.5])


def test_one_hot_vs_uniform():
    # neg-entropies [0, -ln 2] -> softmax [1, 1/2] / 1.5
    w = prediction_weights([[1.0, 0.0], [0.5, 0.5]])
    np.testing.assert_allclose(w, [2 / 3, 1 / 3], atol=1e-12)


def test_single_classifier():
    assert prediction_weights([[0.2, 0.8]]).tolist() == [1.0]


def test_weighted_sum_hand_case():
    probs, label = ensemble_predict([[1.0, 0.0], [0.5, 0.5]], [2 / 3, 1 / 3])
    np.testing.assert_allclose(probs, [5 / 6, 1 / 6])
    assert label == 0


def test_common_prediction_passes_through():
    p = np.array([0.1, 0.6, 0.3])
    probs, label = ensemble_predict(np.stack([p, p, p]), [0.2, 0.5, 0.3])
    np.testing.assert_allclose(probs, p)
    assert label == 1


def test_full_weight_on_one_classifier():
    preds = dirichlet_preds(0)
    probs, _ = ensemble_predict(preds, [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(probs, preds[1])


def test_tie_breaks_to_lowest_index():
    _, label = ensemble_predict([[0.5, 0.5]], [1.0])
    assert label == 0


def test_count_mismatch():
    with pytest.raises(ShapeError):
        ensemble_predict(dirichlet_preds(0), [0.5, 0.5])


def test_variant_average():
    np.testing.assert_allclose(variant_weights(dirichlet_preds(1), "average"), [1 / 3] * 3)


def test_variant_source_accuracy():
    w = variant_weights(dirichlet_preds(1, m=2), "source_accuracy", aux=[60, 40])
    np.testing.assert_allclose(w, [0.6, 0.4])


def test_variant_source_accuracy_needs_aux():
    with pytest.raises(ConfigError):
        ensemble_variant(dirichlet_preds(1, m=2), "source_accuracy")


def test_variant_certainty_delegates():
    preds = dirichlet_preds(2)
    np.testing.assert_array_equal(variant_weights(preds, "certainty"), prediction_weights(preds))


def test_batched_weights_match_per_video():
    batch = np.stack([dirichlet_preds(s) for s in range(5)])
    w = prediction_weights(batch)
    for i in range(5):
        np.testing.assert_allclose(w[i], prediction_weights(batch[i]))
    probs, labels = ensemble_predict(batch, w)
    assert probs.shape == (5, 4) and labels.shape == (5,)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 5), k=st.integers(2, 6))
def test_ensemble_properties(seed, m, k):
    rng = np.random.default_rng(seed)
    preds = rng.dirichlet(np.ones(k) * 0.5, size=m)
    w = prediction_weights(preds)
    assert abs(w.sum() - 1) < 1e-6 and np.all(w > 0)
    # class order inside each prediction does not matter
    perm = rng.permutation(k)
    np.testing.assert_allclose(prediction_weights(preds[:, perm]), w, atol=1e-12)
    # classifier order is carried through
    cperm = rng.permutation(m)
    np.testing.assert_allclose(prediction_weights(preds[cperm]), w[cperm], atol=1e-12)
    probs, _ = ensemble_predict(preds, w)
    assert np.all(probs >= 0) and math.isclose(probs.sum(), 1.0, abs_tol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), m=st.integers(1, 4))
def test_identical_classifiers_same_label_in_every_mode(seed, m):
    p = np.random.default_rng(seed).dirichlet(np.ones(5))
    preds = np.tile(p, (m, 1))
    labels = {int(ensemble_variant(preds, mode, aux=np.arange(1, m + 1))[1])
              for mode in ("certainty", "average", "source_accuracy")}
    assert labels == {int(np.argmax(p))}
