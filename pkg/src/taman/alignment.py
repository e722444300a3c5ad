"""Cross-moment discrepancies across several source domains and one target,
and the full adaptation objective built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .attention import AttentionWeights
from .errors import ConfigError, DataError, ShapeError
from .model import ModelParams, encode_domains, backward_banks
from .numkernel import mlp_backward, mlp_forward, softmax_cross_entropy


@dataclass(frozen=True)
class MomentConfig:
    orders: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        if not self.orders or min(self.orders) < 1:
            raise ConfigError(f"moment orders must be a nonempty set of positive integers, got {self.orders}")


def moment_embedding(batch: np.ndarray, k: int) -> np.ndarray:
    """Mean over rows of the elementwise k-th power, accumulated in float64."""
    batch = np.asarray(batch)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise DataError(f"moment embedding needs a nonempty (rows, dim) batch, got shape {batch.shape}")
    return np.mean(batch.astype(np.float64) ** k, axis=0)


@dataclass
class MomentDiscrepancy:
    """Discrepancy value plus its pieces.

    ``source_target[k][i]`` is ||E(S_i^k) - E(T^k)||, ``source_source[k][i, j]``
    is ||E(S_i^k) - E(S_j^k)|| (symmetric, zero diagonal).
    ``grads`` holds dValue/dbatch for every source then the target.
    """

    value: float
    source_target: dict[int, np.ndarray]
    source_source: dict[int, np.ndarray]
    grads: list[np.ndarray] | None = None


def moment_discrepancy(sources, target, cfg: MomentConfig = MomentConfig(), with_grad: bool = False) -> MomentDiscrepancy:
    """sum_k [ mean_i ||mu_Si - mu_T|| + mean_{i<j} ||mu_Si - mu_Sj|| ].

    The inter-source term is 0 for a single source. Where a distance is exactly
    zero its (sub)gradient is taken as zero.
    """
    sources = [np.asarray(s) for s in sources]
    target = np.asarray(target)
    if not sources:
        raise ConfigError("at least one source domain is required")
    batches = sources + [target]
    dims = {b.shape[1] if b.ndim == 2 else None for b in batches}
    if len(dims) != 1 or None in dims:
        raise ShapeError(f"feature dims differ across domains: {[b.shape for b in batches]}")

    m = len(sources)
    t_idx = m
    pairs = list(combinations(range(m), 2))
    value = 0.0
    st, ss = {}, {}
    grad_mu = [dict() for _ in batches] if with_grad else None

    for k in cfg.orders:
        mu = [moment_embedding(b, k) for b in batches]
        st[k] = np.zeros(m)
        ss[k] = np.zeros((m, m))
        for i in range(m):
            diff = mu[i] - mu[t_idx]
            dist = float(np.sqrt(diff @ diff))
            st[k][i] = dist
            value += dist / m
            if with_grad and dist > 0:
                g = diff / (dist * m)
                grad_mu[i][k] = grad_mu[i].get(k, 0.0) + g
                grad_mu[t_idx][k] = grad_mu[t_idx].get(k, 0.0) - g
        if pairs:
            coeff = 1.0 / math.comb(m, 2)
            for i, j in pairs:
                diff = mu[i] - mu[j]
                dist = float(np.sqrt(diff @ diff))
                ss[k][i, j] = ss[k][j, i] = dist
                value += coeff * dist
                if with_grad and dist > 0:
                    g = coeff * diff / dist
                    grad_mu[i][k] = grad_mu[i].get(k, 0.0) + g
                    grad_mu[j][k] = grad_mu[j].get(k, 0.0) - g

    grads = None
    if with_grad:
        grads = []
        for b, gm in zip(batches, grad_mu):
            x = b.astype(np.float64)
            g = np.zeros_like(x)
            for k, gk in gm.items():
                g += (k * x ** (k - 1)) * (gk / x.shape[0])
            grads.append(g.astype(b.dtype))
    return MomentDiscrepancy(value, st, ss, grads)


# ----- objective -----

@dataclass
class DomainBatchSet:
    """One mini-batch per domain with its frozen clip draws.

    ``clips[d][r]`` is (B_d, z, r); domain index ``d`` runs over the sources
    in order, then the target.
    """

    source_frames: list[np.ndarray]  # each (B, h, d_f)
    source_labels: list[np.ndarray]
    target_frames: np.ndarray
    clips: list[dict[int, np.ndarray]]

    def __post_init__(self):
        if len(self.source_labels) != len(self.source_frames) or any(y is None for y in self.source_labels):
            raise DataError("every source batch must carry labels")
        if len(self.clips) != len(self.source_frames) + 1:
            raise DataError("clip draws must be given for every source and the target")
        for i, (x, y) in enumerate(zip(self.source_frames, self.source_labels)):
            if len(y) != len(x):
                raise DataError(f"source {i}: {len(y)} labels for {len(x)} videos")

    @property
    def frames(self) -> list[np.ndarray]:
        return self.source_frames + [self.target_frames]


@dataclass
class LossBreakdown:
    cls: list[float]
    d_f: float
    d_t: float
    lambda_df: float
    lambda_dt: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = math.fsum(self.cls) + self.lambda_df * self.d_f + self.lambda_dt * self.d_t


def spatial_features(frames: np.ndarray) -> np.ndarray:
    """Video-level spatial feature: mean over the frame axis."""
    return frames.mean(axis=1)


def global_features(banks, weights: AttentionWeights) -> list[np.ndarray]:
    """t for every domain (sources then target) from per-scale local features."""
    out = []
    n_src = len(banks) - 1
    for d, bank in enumerate(banks):
        if weights.additive:
            out.append(sum(bank[r] for r in weights.scales))
            continue
        w = weights.source[d] if d < n_src else weights.target
        out.append(sum(bank[r] * bank[r].dtype.type(w_r) for r, w_r in zip(weights.scales, w)))
    return out


def taman_loss(
    model: ModelParams,
    batches: DomainBatchSet,
    weights: AttentionWeights,
    lambda_df: float = 0.005,
    lambda_dt: float = 0.01,
    moments: MomentConfig = MomentConfig(),
    encoded=None,
    with_grad: bool = True,
):
    """Multi-source classification loss plus weighted spatial and temporal discrepancies.

    Returns ``(LossBreakdown, grads)``; grads is keyed like
    ``model.named_arrays()``. ``encoded`` may carry a previous
    :func:`encode_domains` result for the same batches and parameters.
    Attention weights are constants here.
    """
    n_src = len(batches.source_frames)
    if n_src != model.n_sources:
        raise DataError(f"{n_src} source batches for a model with {model.n_sources} classifiers")
    if encoded is None:
        encoded = encode_domains(model, batches.frames, batches.clips)
    banks = encoded.banks
    t = global_features(banks, weights)

    cls_losses = []
    grad_t = [np.zeros_like(x) for x in t]
    cls_grads = []
    for j in range(n_src):
        logits, cache = mlp_forward(model.classifiers[j], t[j])
        loss, dlogits = softmax_cross_entropy(logits, batches.source_labels[j])
        cls_losses.append(loss)
        if with_grad:
            g, dt = mlp_backward(model.classifiers[j], cache, dlogits)
            cls_grads.append(g)
            grad_t[j] += dt

    d_f = moment_discrepancy([spatial_features(x) for x in batches.source_frames],
                             spatial_features(batches.target_frames), moments).value
    disc_t = moment_discrepancy(t[:n_src], t[n_src], moments, with_grad=with_grad and lambda_dt != 0)
    breakdown = LossBreakdown(cls_losses, d_f, disc_t.value, lambda_df, lambda_dt)
    if not with_grad:
        return breakdown, None

    if disc_t.grads is not None:
        for d, g in enumerate(disc_t.grads):
            grad_t[d] += lambda_dt * g

    # t = sum_r w_r lt_r (or plain sum), weights held constant
    grad_banks = []
    for d, g in enumerate(grad_t):
        if weights.additive:
            w = np.ones(len(weights.scales))
        else:
            w = weights.source[d] if d < n_src else weights.target
        grad_banks.append({r: g * g.dtype.type(w_r) for r, w_r in zip(weights.scales, w)})

    grads = backward_banks(model, encoded, grad_banks)
    for j, layer_grads in enumerate(cls_grads):
        for i, (dw, db) in enumerate(layer_grads):
            grads[f"cls{j}.{i}.W"] = dw
            grads[f"cls{j}.{i}.b"] = db
    # spatial features come from a frozen extractor: d_f has no parameter path
    return breakdown, grads
