"""Finite-difference check of the full objective on a tiny instance."""

from __future__ import annotations

import numpy as np

from ..alignment import DomainBatchSet, MomentConfig, taman_loss
from ..attention import AttentionWeights
from ..model import ModelParams, encode_domains
from ..numkernel import GradCheckReport, grad_check
from ..temporal import sample_clip_batch
from .training import step_attention


def tiny_instance(seed: int = 0, h: int = 4, d_f: int = 6, scales=(2, 3), z_max: int = 2, n_classes: int = 3,
                  n_sources: int = 2, batch: int = 8, dtype=np.float64):
    """Random model and batches with clips drawn once and then frozen."""
    rng = np.random.default_rng(seed)
    model = ModelParams.init(d_f, n_classes, n_sources, scales, hidden=(8,), d_t=5, seed=seed, dtype=dtype,
                             output_scale=1.0)
    frames = [rng.uniform(-2, 2, (batch, h, d_f)).astype(dtype) for _ in range(n_sources + 1)]
    labels = [rng.integers(0, n_classes, batch) for _ in range(n_sources)]
    clips = [{r: sample_clip_batch(h, r, z_max, batch, rng) for r in scales} for _ in range(n_sources + 1)]
    return model, DomainBatchSet(frames[:-1], labels, frames[-1], clips)


def check_objective(seed: int = 0, variant: str = "full", weights: AttentionWeights | None = None,
                    lambda_df: float = 0.005, lambda_dt: float = 0.01, eps: float = 1e-6,
                    tol: float = 1e-3) -> GradCheckReport:
    """Central differences vs analytic gradients of the whole objective.

    Attention weights come from the base point and stay fixed while
    parameters are perturbed, matching how training treats them.
    """
    model, batches = tiny_instance(seed)
    moments = MomentConfig()
    if weights is None:
        weights, _ = step_attention(model, encode_domains(model, batches.frames, batches.clips).banks,
                                    variant, moments)
    params = model.named_arrays()

    def loss_fn():
        breakdown, grads = taman_loss(model, batches, weights, lambda_df, lambda_dt, moments)
        return breakdown.total, grads

    return grad_check(loss_fn, params, eps=eps, tol=tol)
