"""Local attention weights: confidence, dominance, and their combination.

All weights here are treated as constants by the training step; nothing in
this module participates in backpropagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ScaleError, ShapeError
from .numkernel import neg_entropy, softmax

TANH_ONE = math.tanh(1.0)


def confidence_weight(probs) -> np.ndarray | float:
    """tanh(1 + C) with C the negative entropy normalized by ln K.

    Accepts one probability vector or a (batch, K) matrix; C lies in [-1, 0]
    so the weight lies in [0, tanh(1)].
    """
    p = np.asarray(probs, dtype=np.float64)
    k = p.shape[-1]
    if k < 2:
        raise ConfigError(f"confidence needs at least 2 classes, got K={k}")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-5):
        raise ValueError("probabilities must be nonnegative and sum to 1")
    c = np.clip(neg_entropy(p) / math.log(k), -1.0, 0.0)
    w = np.tanh(1.0 + c)
    return float(w) if np.ndim(w) == 0 else w


def dominance_weights(d_global: float, d_local) -> np.ndarray:
    """Softmax over |d_global - d_local[r]| across scales."""
    d_local = np.asarray(d_local, dtype=np.float64)
    if d_local.size == 0:
        raise ConfigError("dominance weights need at least one scale")
    if not (np.all(np.isfinite(d_local)) and np.isfinite(d_global)):
        raise ValueError("discrepancies must be finite")
    if np.any(d_local < 0) or d_global < 0:
        raise ValueError("discrepancies must be nonnegative")
    return softmax(np.abs(d_global - d_local))


def combine_weights(w_conf, w_dom) -> np.ndarray:
    """Per-scale product, renormalized; falls back to ``w_dom`` if every confidence is 0."""
    w_conf = np.asarray(w_conf, dtype=np.float64)
    w_dom = np.asarray(w_dom, dtype=np.float64)
    if w_conf.shape != w_dom.shape:
        raise ShapeError(f"confidence weights {w_conf.shape} vs dominance weights {w_dom.shape}")
    w = w_conf * w_dom
    total = w.sum()
    if total < 1e-12:
        return w_dom.copy()
    return w / total


def target_weights(w_dom) -> np.ndarray:
    return np.array(w_dom, dtype=np.float64)


@dataclass
class AttentionWeights:
    """Per-domain scale weights for one step.

    ``source`` is (M, R), ``target`` is (R,), columns ordered like ``scales``.
    With ``additive`` set, global features are the plain sum over scales and
    the weight arrays are ignored.
    """

    scales: tuple[int, ...]
    source: np.ndarray
    target: np.ndarray
    additive: bool = False
    dominance: np.ndarray | None = None

    def __post_init__(self):
        r = len(self.scales)
        if self.source.ndim != 2 or self.source.shape[1] != r or self.target.shape != (r,):
            raise ScaleError(f"weights shaped {self.source.shape}/{self.target.shape} for {r} scales")

    def for_source(self, m: int) -> dict[int, float]:
        return dict(zip(self.scales, self.source[m].tolist()))

    def for_target(self) -> dict[int, float]:
        return dict(zip(self.scales, self.target.tolist()))

    @classmethod
    def uniform(cls, scales, n_sources: int) -> "AttentionWeights":
        r = len(scales)
        return cls(tuple(scales), np.full((n_sources, r), 1.0 / r), np.full(r, 1.0 / r))
