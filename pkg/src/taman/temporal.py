"""Clip sampling, clip-level local temporal features and their aggregation."""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import NormalizationError, ScaleError, ShapeError
from .numkernel import MlpCache, MlpParams, mlp_backward, mlp_forward

SAMPLING_MODES = ("train-random", "eval-deterministic", "exhaustive")


@dataclass(frozen=True)
class ScaleConfig:
    scales: tuple[int, ...]
    z_max: int = 3
    sampling_mode: str = "train-random"

    def __post_init__(self):
        if not self.scales:
            raise ScaleError("at least one scale is required")
        if min(self.scales) < 2:
            raise ScaleError(f"scales must be >= 2, got {sorted(self.scales)}")
        if self.z_max < 1:
            raise ScaleError(f"z_max must be >= 1, got {self.z_max}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ScaleError(f"unknown sampling mode {self.sampling_mode!r}")

    @classmethod
    def default(cls, h: int, **kw) -> "ScaleConfig":
        return cls(tuple(range(2, h + 1)), **kw)


@dataclass
class FrameFeatureSequence:
    video_id: str
    frames: np.ndarray  # (h, d_f), rows in temporal order

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[0] < 2:
            raise ShapeError(f"need an (h >= 2, d_f) frame matrix, got shape {self.frames.shape}")

    @property
    def h(self) -> int:
        return self.frames.shape[0]

    @property
    def d_f(self) -> int:
        return self.frames.shape[1]


@dataclass
class ClipSample:
    """Sampled clips for one scale: ``indices`` is (n_clips, r), each row increasing."""

    indices: np.ndarray
    clamped: bool = False

    @property
    def r(self) -> int:
        return self.indices.shape[1]

    def __len__(self):
        return self.indices.shape[0]


@lru_cache(maxsize=None)
def all_clips(h: int, r: int) -> np.ndarray:
    """Every increasing r-subset of range(h), lexicographic order."""
    if not 2 <= r <= h:
        raise ScaleError(f"scale r={r} outside [2, h={h}]")
    out = np.array(list(itertools.combinations(range(h), r)), dtype=np.int64)
    out.setflags(write=False)
    return out


def video_seed(video_id: str, r: int) -> list[int]:
    return [zlib.crc32(video_id.encode("utf-8")), r]


def sample_clips(h: int, r: int, cfg: ScaleConfig, seed: int = 0, video_id: str = "") -> ClipSample:
    """Pick the clips of scale ``r`` used for one video.

    ``exhaustive`` ignores ``z_max``. ``train-random`` uses ``seed``;
    ``eval-deterministic`` derives its seed from ``(video_id, r)`` only.
    """
    combos = all_clips(h, r)
    if cfg.sampling_mode == "exhaustive":
        return ClipSample(combos.copy())
    n = len(combos)
    z = min(cfg.z_max, n)
    if cfg.sampling_mode == "eval-deterministic":
        rng = np.random.default_rng(video_seed(video_id, r))
    else:
        rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(n, size=z, replace=False))
    return ClipSample(combos[picked], clamped=cfg.z_max > n)


def sample_clip_batch(h: int, r: int, z_max: int, batch: int, rng: np.random.Generator) -> np.ndarray:
    """Independent train-random draws for ``batch`` videos, shape (batch, z, r)."""
    combos = all_clips(h, r)
    n = len(combos)
    z = min(z_max, n)
    if z == n:
        picked = np.broadcast_to(np.arange(n), (batch, n))
    else:
        picked = np.sort(np.argsort(rng.random((batch, n)), axis=1)[:, :z], axis=1)
    return combos[picked]


def eval_clip_batch(video_ids, h: int, r: int, z_max: int) -> np.ndarray:
    cfg = ScaleConfig((r,), z_max, "eval-deterministic")
    return np.stack([sample_clips(h, r, cfg, video_id=v).indices for v in video_ids])


# ----- local temporal features -----

def gather_clips(frames: np.ndarray, clips: np.ndarray) -> np.ndarray:
    """Concatenate each clip's frames in temporal order.

    frames (B, h, d_f), clips (B, z, r) -> (B * z, r * d_f)
    """
    b, z, r = clips.shape
    if clips.size and clips.max() >= frames.shape[1]:
        raise IndexError(f"clip frame index {clips.max()} out of range for h={frames.shape[1]}")
    rows = frames[np.arange(b)[:, None, None], clips]  # (B, z, r, d_f)
    return rows.reshape(b * z, r * frames.shape[2])


def local_temporal_features(frames: np.ndarray, clips: np.ndarray, g_r: MlpParams):
    """Batched lt^(r): sum over each video's clips of g_r(concatenated clip).

    Returns ``(lt, cache)`` with lt shaped (B, d_t).
    """
    b, z, r = clips.shape
    if g_r.in_dim != r * frames.shape[2]:
        raise ShapeError(f"g_r in-dim {g_r.in_dim} vs clip width r*d_f = {r * frames.shape[2]}")
    out, cache = mlp_forward(g_r, gather_clips(frames, clips))
    return out.reshape(b, z, -1).sum(axis=1), cache


def local_temporal_backward(g_r: MlpParams, cache: MlpCache, n_clips: int, grad_lt: np.ndarray):
    """Parameter grads of g_r given dL/dlt (B, d_t); every clip receives the same upstream."""
    upstream = np.repeat(grad_lt, n_clips, axis=0)
    grads, _ = mlp_backward(g_r, cache, upstream)
    return grads


def local_temporal_feature(seq: FrameFeatureSequence, clips: ClipSample, g_r: MlpParams) -> np.ndarray:
    """lt^(r) for a single video."""
    lt, _ = local_temporal_features(seq.frames[None], clips.indices[None], g_r)
    return lt[0]


# ----- aggregation over scales -----

LocalFeatureBank = Mapping[int, np.ndarray]  # scale r -> lt^(r), (d_t,) or (B, d_t)


def _check_bank(bank: LocalFeatureBank):
    if not bank:
        raise ScaleError("local feature bank is empty")
    shapes = {r: np.shape(v) for r, v in bank.items()}
    if len(set(shapes.values())) != 1:
        raise ShapeError(f"local features disagree in shape across scales: {shapes}")


def raw_global_feature(bank: LocalFeatureBank) -> np.ndarray:
    """Plain additive aggregation across scales."""
    _check_bank(bank)
    return sum(bank[r] for r in sorted(bank))


def attentive_global_feature(bank: LocalFeatureBank, weights: Mapping[int, float]) -> np.ndarray:
    _check_bank(bank)
    if set(weights) != set(bank):
        raise ScaleError(f"weights cover scales {sorted(weights)} but bank has {sorted(bank)}")
    total = math.fsum(float(w) for w in weights.values())
    if abs(total - 1.0) > 1e-6:
        raise NormalizationError(f"scale weights sum to {total}, expected 1")
    return sum(np.asarray(weights[r], dtype=bank[r].dtype) * bank[r] for r in sorted(bank))
