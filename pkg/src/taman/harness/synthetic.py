"""Desk-scale multi-domain video features with order-dependent classes.

Each base class c owns a prototype pair (u_c, v_c): the first half of its
frames sit around u_c and the second half around v_c. Its confuser class
c + K reuses the pair in reverse order, so frame-averaged features cannot
tell the two apart. Domains add a fixed bias vector and their own noise
level to every frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .formats import Manifest, write_features, write_manifest


@dataclass
class SyntheticDomain:
    name: str
    bias: np.ndarray
    sigma: float


@dataclass
class SyntheticSpec:
    n_base_classes: int  # K; the generated label space has 2K classes
    domains: list[SyntheticDomain]
    h: int = 8
    d_f: int = 16
    videos_per_class: int = 200
    seed: int = 0
    test_fraction: float = 0.25
    prototype_scale: float = 1.0

    def __post_init__(self):
        if len(self.domains) < 2:
            raise ConfigError("a synthetic benchmark needs at least 2 domains")
        if any(d.sigma <= 0 for d in self.domains):
            raise ConfigError("domain noise scales must be positive")
        if self.h < 2 or self.n_base_classes < 1:
            raise ConfigError("need h >= 2 and at least one base class")
        for d in self.domains:
            if np.shape(d.bias) != (self.d_f,):
                raise ConfigError(f"domain {d.name} bias shape {np.shape(d.bias)} vs d_f={self.d_f}")

    @property
    def n_classes(self) -> int:
        return 2 * self.n_base_classes


def random_domains(names, d_f: int, bias_scale: float, sigma: float = 0.5, seed: int = 0) -> list[SyntheticDomain]:
    """Domains with independent Gaussian bias vectors of expected norm ~ bias_scale."""
    rng = np.random.default_rng([seed, 7919])
    return [SyntheticDomain(n, rng.standard_normal(d_f) * bias_scale / math.sqrt(d_f), sigma) for n in names]


def prototypes(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """(first-half, second-half) prototypes for all 2K classes, each (2K, d_f)."""
    rng = np.random.default_rng([spec.seed, 0])
    u = rng.standard_normal((spec.n_base_classes, spec.d_f)) * spec.prototype_scale
    v = rng.standard_normal((spec.n_base_classes, spec.d_f)) * spec.prototype_scale
    return np.concatenate([u, v]), np.concatenate([v, u])


@dataclass
class DomainArrays:
    name: str
    frames: np.ndarray  # (N, h, d_f) float32
    labels: np.ndarray
    video_ids: list[str] = field(default_factory=list)


def synthesize(spec: SyntheticSpec) -> dict[str, dict[str, DomainArrays]]:
    """In-memory benchmark: ``{domain: {"train": ..., "test": ...}}``."""
    first, second = prototypes(spec)
    n_first = math.ceil(spec.h / 2)
    n_test = int(round(spec.videos_per_class * spec.test_fraction))
    out = {}
    for m, dom in enumerate(spec.domains):
        rng = np.random.default_rng([spec.seed, 1 + m])
        n = spec.n_classes * spec.videos_per_class
        labels = np.repeat(np.arange(spec.n_classes), spec.videos_per_class)
        means = np.empty((n, spec.h, spec.d_f))
        means[:, :n_first] = first[labels][:, None]
        means[:, n_first:] = second[labels][:, None]
        frames = (means + dom.bias + dom.sigma * rng.standard_normal(means.shape)).astype(np.float32)
        within = np.tile(np.arange(spec.videos_per_class), spec.n_classes)
        is_test = within < n_test
        splits = {}
        for split, mask in (("train", ~is_test), ("test", is_test)):
            ids = [f"{dom.name}/{split}/{lab:02d}_{i:04d}" for lab, i in zip(labels[mask], within[mask])]
            splits[split] = DomainArrays(dom.name, frames[mask], labels[mask], ids)
        out[dom.name] = splits
    return out


def generate_synthetic(spec: SyntheticSpec, out_dir) -> dict[str, dict[str, Path]]:
    """Write TMNF files plus per-domain manifests under ``out_dir``.

    Returns ``{domain: {"train": path, "test": path, "unlabeled": path}}``;
    the unlabeled manifest lists the train split with labels -1.
    """
    out_dir = Path(out_dir)
    paths = {}
    for name, splits in synthesize(spec).items():
        paths[name] = {}
        for split, arr in splits.items():
            (out_dir / name / split).mkdir(parents=True, exist_ok=True)
            records = []
            for frames, lab, vid in zip(arr.frames, arr.labels, arr.video_ids):
                rel = vid + ".tmnf"
                write_features(out_dir / rel, frames)
                records.append((rel, int(lab), name))
            manifest = Manifest(spec.n_classes, records, "source" if split == "train" else "target-test")
            paths[name][split] = out_dir / f"{name}_{split}.tsv"
            write_manifest(paths[name][split], manifest)
            if split == "train":
                paths[name]["unlabeled"] = out_dir / f"{name}_train_unlabeled.tsv"
                write_manifest(paths[name]["unlabeled"], manifest.unlabeled())
    return paths
