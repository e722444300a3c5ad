"""Trainable parameters: one integration MLP per scale (shared by every
domain) and one classifier per source domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numkernel import MlpCache, MlpParams, mlp_backward, mlp_forward, real
from .temporal import gather_clips


@dataclass
class ModelParams:
    scales: tuple[int, ...]
    integrators: dict[int, MlpParams]
    classifiers: list[MlpParams]

    def __post_init__(self):
        dims = {g.out_dim for g in self.integrators.values()} | {c.in_dim for c in self.classifiers}
        if len(dims) != 1:
            raise ShapeError(f"integrator outputs and classifier inputs must share one dim, got {sorted(dims)}")
        if set(self.integrators) != set(self.scales):
            raise ShapeError(f"integrators for {sorted(self.integrators)} but scales {self.scales}")
        if len({c.out_dim for c in self.classifiers}) != 1:
            raise ShapeError("classifiers disagree on class count")

    @property
    def n_sources(self) -> int:
        return len(self.classifiers)

    @property
    def n_classes(self) -> int:
        return self.classifiers[0].out_dim

    @property
    def d_t(self) -> int:
        return self.classifiers[0].in_dim

    @property
    def d_f(self) -> int:
        r = self.scales[0]
        return self.integrators[r].in_dim // r

    @classmethod
    def init(cls, d_f: int, n_classes: int, n_sources: int, scales, hidden=(256,), d_t: int = 256,
             classifier_hidden=(), seed: int = 0, dtype=real, output_scale: float = 0.1) -> "ModelParams":
        rng = np.random.default_rng(seed)
        scales = tuple(sorted(scales))
        integrators = {r: MlpParams.init([r * d_f, *hidden, d_t], rng, dtype) for r in scales}
        classifiers = [MlpParams.init([d_t, *classifier_hidden, n_classes], rng, dtype) for _ in range(n_sources)]
        # small output layers keep initial features and logits near zero
        for net in [*integrators.values(), *classifiers]:
            w, _ = net.layers[-1]
            w *= output_scale
        return cls(scales, integrators, classifiers)

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for r in self.scales:
            out.update(self.integrators[r].named_arrays(f"g{r}."))
        for j, c in enumerate(self.classifiers):
            out.update(c.named_arrays(f"cls{j}."))
        return out

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.scales, {r: g.astype(dtype) for r, g in self.integrators.items()},
                           [c.astype(dtype) for c in self.classifiers])

    @classmethod
    def from_arrays(cls, scales, arrays: dict[str, np.ndarray]) -> "ModelParams":
        def mlp(prefix):
            layers, i = [], 0
            while f"{prefix}{i}.W" in arrays:
                layers.append((arrays[f"{prefix}{i}.W"], arrays[f"{prefix}{i}.b"]))
                i += 1
            return MlpParams(layers)

        n_src = 0
        while f"cls{n_src}.0.W" in arrays:
            n_src += 1
        return cls(tuple(scales), {r: mlp(f"g{r}.") for r in scales}, [mlp(f"cls{j}.") for j in range(n_src)])


@dataclass
class Encoded:
    """Forward record for several domains encoded together."""

    banks: list[dict[int, np.ndarray]]  # per domain: scale -> (B_d, d_t)
    caches: dict[int, MlpCache]
    sizes: list[int]
    n_clips: dict[int, int]


def encode_domains(model: ModelParams, frames: list[np.ndarray], clips: list[dict[int, np.ndarray]]) -> Encoded:
    """Local temporal features of every domain, one MLP pass per scale.

    ``frames[d]`` is (B_d, h, d_f); ``clips[d][r]`` is (B_d, z, r).
    """
    sizes = [len(x) for x in frames]
    banks = [dict() for _ in frames]
    caches, n_clips = {}, {}
    for r in model.scales:
        g = model.integrators[r]
        z = clips[0][r].shape[1]
        rows = np.concatenate([gather_clips(x, c[r]) for x, c in zip(frames, clips)])
        if g.in_dim != rows.shape[1]:
            raise ShapeError(f"g_{r} in-dim {g.in_dim} vs clip width r*d_f = {rows.shape[1]}")
        out, caches[r] = mlp_forward(g, rows)
        lt = out.reshape(-1, z, out.shape[1]).sum(axis=1)
        n_clips[r] = z
        start = 0
        for d, n in enumerate(sizes):
            banks[d][r] = lt[start:start + n]
            start += n
    return Encoded(banks, caches, sizes, n_clips)


def backward_banks(model: ModelParams, encoded: Encoded, grad_banks: list[dict[int, np.ndarray]]) -> dict[str, np.ndarray]:
    """Integrator gradients from dL/dlt for every domain and scale."""
    grads = {}
    for r in model.scales:
        g_lt = np.concatenate([gb[r] for gb in grad_banks])
        upstream = np.repeat(g_lt, encoded.n_clips[r], axis=0)
        layer_grads, _ = mlp_backward(model.integrators[r], encoded.caches[r], upstream)
        for i, (dw, db) in enumerate(layer_grads):
            grads[f"g{r}.{i}.W"] = dw
            grads[f"g{r}.{i}.b"] = db
    return grads
