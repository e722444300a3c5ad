"""Combining the per-source classifiers' predictions on target videos."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError
from .numkernel import neg_entropy, softmax

ENSEMBLE_MODES = ("certainty", "average", "source_accuracy")


def prediction_weights(preds) -> np.ndarray:
    """Softmax across classifiers of each prediction's negative entropy.

    ``preds`` is (M, K) for one video or (N, M, K) for a batch of videos.
    """
    preds = np.asarray(preds, dtype=np.float64)
    return softmax(neg_entropy(preds, axis=-1), axis=-1)


def ensemble_predict(preds, weights):
    """Weighted sum of the classifiers' probability vectors and its argmax.

    np.argmax already returns the first (lowest-index) maximum on ties.
    """
    preds = np.asarray(preds, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != preds.shape[:-1]:
        raise ShapeError(f"{weights.shape} weights for predictions shaped {preds.shape}")
    probs = np.sum(weights[..., None] * preds, axis=-2)
    return probs, np.argmax(probs, axis=-1)


def variant_weights(preds, mode: str = "certainty", aux=None) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    m = preds.shape[-2]
    if mode == "certainty":
        return prediction_weights(preds)
    if mode == "average":
        return np.full(preds.shape[:-1], 1.0 / m)
    if mode == "source_accuracy":
        if aux is None:
            raise ConfigError("source_accuracy ensembling needs per-source source-only accuracies")
        aux = np.asarray(aux, dtype=np.float64)
        if aux.shape != (m,) or aux.sum() <= 0:
            raise ConfigError(f"need {m} positive source-only accuracies, got {aux}")
        return np.broadcast_to(aux / aux.sum(), preds.shape[:-1]).copy()
    raise ConfigError(f"unknown ensemble mode {mode!r}; expected one of {ENSEMBLE_MODES}")


def ensemble_variant(preds, mode: str = "certainty", aux=None):
    return ensemble_predict(preds, variant_weights(preds, mode, aux))
