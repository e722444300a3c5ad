"""Dense numeric primitives with hand-derived gradients.

Everything operates on 2-D numpy arrays laid out as (batch, features).
Arrays keep the dtype they come in with (float32 for training); reductions
that feed losses accumulate in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CacheError, LabelError, ShapeError

real = np.float32


# ----- MLP -----

@dataclass
class MlpParams:
    """Stack of affine layers; rectifier between layers, identity on the output.

    ``layers`` holds ``(weight, bias)`` with weight shaped (in_dim, out_dim).
    """

    layers: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        for i in range(len(self.layers) - 1):
            out_dim = self.layers[i][0].shape[1]
            in_dim = self.layers[i + 1][0].shape[0]
            if out_dim != in_dim:
                raise ShapeError(f"layer {i} out-dim {out_dim} does not chain into layer {i + 1} in-dim {in_dim}")
        for i, (w, b) in enumerate(self.layers):
            if b.shape != (w.shape[1],):
                raise ShapeError(f"layer {i} bias shape {b.shape} vs weight out-dim {w.shape[1]}")

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[1]

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, dtype=real) -> "MlpParams":
        """He-normal weights and zero biases for layer widths ``sizes``."""
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            w = rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in)
            layers.append((w.astype(dtype), np.zeros(fan_out, dtype=dtype)))
        return cls(layers)

    def named_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(self.layers):
            out[f"{prefix}{i}.W"] = w
            out[f"{prefix}{i}.b"] = b
        return out

    def astype(self, dtype) -> "MlpParams":
        return MlpParams([(w.astype(dtype), b.astype(dtype)) for w, b in self.layers])


@dataclass
class MlpCache:
    """Activations saved by :func:`mlp_forward` for the backward pass."""

    params_id: int
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each layer
    pre: list[np.ndarray] = field(default_factory=list)  # pre-activation of each layer


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        got = x.shape[1] if x.ndim == 2 else x.shape
        raise ShapeError(f"input has {got} columns but first layer expects in-dim {params.in_dim}")
    cache = MlpCache(params_id=id(params))
    a = x
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        cache.inputs.append(a)
        z = a @ w + b
        cache.pre.append(z)
        a = np.maximum(z, 0) if i < last else z
    return a, cache


def mlp_backward(params: MlpParams, cache: MlpCache, upstream: np.ndarray):
    """Backpropagate ``upstream`` (dL/doutput) through the network.

    Returns ``(grads, input_grad)`` where ``grads`` mirrors ``params.layers``.
    """
    if cache.params_id != id(params) or len(cache.pre) != len(params.layers):
        raise CacheError("cache was not produced by a forward pass of these parameters")
    for i, (w, _) in enumerate(params.layers):
        if cache.inputs[i].shape[1] != w.shape[0] or cache.pre[i].shape[1] != w.shape[1]:
            raise CacheError(f"cache layer {i} shapes do not match current parameters")
    expected = cache.pre[-1].shape
    if upstream.shape != expected:
        raise ShapeError(f"upstream grad shape {upstream.shape} vs forward output shape {expected}")

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)  # type: ignore[list-item]
    delta = upstream
    for i in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[i]
        grads[i] = (cache.inputs[i].T @ delta, delta.sum(axis=0))
        delta = delta @ w.T
        if i > 0:
            delta = delta * (cache.pre[i - 1] > 0)
    return grads, delta


# ----- softmax / entropy / cross-entropy -----

def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def neg_entropy(p: np.ndarray, axis: int = -1) -> np.ndarray:
    """sum_c p_c ln p_c along ``axis``, using 0 ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    safe = np.where(p > 0, p, 1.0)
    return np.sum(np.where(p > 0, p * np.log(safe), 0.0), axis=axis)


def softmax_cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"{labels.shape[0] if labels.ndim else 0} labels for {n} logit rows")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise LabelError(f"label out of range [0, {k}): {labels.min()}..{labels.max()}")
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]))
    probs = np.exp(z - log_norm[:, None])
    probs[rows, labels] -= 1.0
    return loss, (probs / n).astype(logits.dtype)


# ----- SGD -----

@dataclass
class SgdState:
    lr: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    velocity: dict[str, np.ndarray] = field(default_factory=dict)


def sgd_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: SgdState):
    """In-place momentum SGD with coupled weight decay.

    v <- momentum * v + (g + weight_decay * p);  p <- p - lr * v
    """
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"grad {name} shape {g.shape} vs param shape {p.shape}")
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
            state.velocity[name] = v
        elif v.shape != p.shape:
            raise ShapeError(f"velocity {name} shape {v.shape} vs param shape {p.shape}")
        v *= state.momentum
        v += g
        if state.weight_decay:
            v += state.weight_decay * p
        p -= state.lr * v
    return params, state


# ----- gradient checking -----

@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float]
    tolerance: float
    passed: bool
    failure: str | None = None

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)


def relative_error(analytic, numeric, floor: float = 1e-8):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(
    loss_fn: Callable[[], tuple[float, dict[str, np.ndarray]]],
    params: dict[str, np.ndarray],
    eps: float = 1e-4,
    tol: float = 1e-3,
) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    ``loss_fn()`` evaluates the loss at the current contents of ``params``
    (perturbed in place here) and returns ``(loss, grads)`` with grads keyed
    like ``params``.
    """
    loss, analytic = loss_fn()
    if not np.isfinite(loss):
        return GradCheckReport({}, tol, False, "non-finite loss at the base point")
    errors = {}
    for name, p in params.items():
        numeric = np.zeros(p.size)
        flat = p.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = loss_fn()[0]
            flat[i] = old - eps
            down = loss_fn()[0]
            flat[i] = old
            if not (np.isfinite(up) and np.isfinite(down)):
                return GradCheckReport(errors, tol, False, f"non-finite loss perturbing {name}[{i}]")
            numeric[i] = (up - down) / (2 * eps)
        errors[name] = float(relative_error(analytic[name].reshape(-1), numeric).max(initial=0.0))
    passed = all(e < tol for e in errors.values())
    return GradCheckReport(errors, tol, passed)
