"""Run configuration, data loading and the training loop."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..alignment import DomainBatchSet, LossBreakdown, MomentConfig, moment_discrepancy, taman_loss
from ..attention import AttentionWeights, combine_weights, confidence_weight, dominance_weights
from ..errors import ConfigError, DataError, DivergenceError
from ..model import ModelParams, encode_domains
from ..numkernel import SgdState, mlp_forward, sgd_step, softmax
from ..temporal import sample_clip_batch
from .formats import Checkpoint, Manifest, load_features, save_checkpoint, write_metrics
from .synthetic import DomainArrays

log = logging.getLogger(__name__)

TRAIN_VARIANTS = ("full", "no_confidence", "no_dominance", "no_local_attention",
                  "dominance_min", "dominance_max", "source_only")
ENSEMBLE_VARIANTS = {"ensemble_avg": "average", "ensemble_src_accuracy": "source_accuracy"}
VARIANTS = TRAIN_VARIANTS + tuple(ENSEMBLE_VARIANTS)


@dataclass
class RunConfig:
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0001
    epochs: int = 100
    batch_size: int = 32
    lambda_df: float = 0.005
    lambda_dt: float = 0.01
    scales: tuple[int, ...] | None = None  # None: every r in [2, h]
    z_max: int = 3
    moment_orders: tuple[int, ...] = (1, 2)
    seed: int = 0
    variant: str = "full"
    hidden: tuple[int, ...] = (256,)
    d_t: int = 256
    classifier_hidden: tuple[int, ...] = ()
    lr_decay_epochs: tuple[int, ...] = ()
    init_scale: float = 0.1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        for name in ("lr", "epochs", "batch_size", "z_max", "d_t"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("momentum", "weight_decay", "lambda_df", "lambda_dt"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        MomentConfig(tuple(self.moment_orders))

    @property
    def train_variant(self) -> str:
        return "full" if self.variant in ENSEMBLE_VARIANTS else self.variant

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        """Build from strings (config files, CLI) or already-typed values."""
        kwargs = {}
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            default = getattr(cls(), key)
            if key in ("scales", "hidden", "moment_orders", "classifier_hidden", "lr_decay_epochs"):
                kwargs[key] = _int_tuple(raw) if not (key == "scales" and raw in (None, "", "all")) else None
            elif isinstance(default, bool):
                kwargs[key] = raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = str(raw)
        return cls(**kwargs)


def _int_tuple(raw) -> tuple[int, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(int(x) for x in raw)
    raw = str(raw).strip().strip("[]()")
    return tuple(int(x) for x in raw.replace(",", " ").split()) if raw else ()


# ----- data -----

@lru_cache(maxsize=64)
def _load_paths(paths: tuple[str, ...]) -> np.ndarray:
    arr = np.stack([load_features(p) for p in paths])
    arr.setflags(write=False)
    return arr


def load_domain(manifest: Manifest) -> DomainArrays:
    """All videos listed in a manifest as one (N, h, d_f) array."""
    if not manifest.records:
        raise DataError(f"manifest for {manifest.domain!r} is empty")
    paths = tuple(manifest.resolve(p) for p, _, _ in manifest.records)
    labels = None if manifest.role == "target-train" else manifest.labels
    ids = [p for p, _, _ in manifest.records]
    return DomainArrays(manifest.domain, _load_paths(paths), labels, ids)


def _as_domain(data, *, unlabeled=False) -> DomainArrays:
    if isinstance(data, Manifest):
        if unlabeled and data.role != "target-train":
            raise DataError("the adaptation target must be an unlabeled (target-train) manifest")
        data = load_domain(data)
    if len(data.frames) == 0:
        raise DataError(f"domain {data.name!r} has no videos")
    if unlabeled:
        return DomainArrays(data.name, data.frames, None, data.video_ids)
    if data.labels is None:
        raise DataError(f"source domain {data.name!r} has no labels")
    return data


class _IndexStream:
    """Endless shuffled index stream; smaller domains get resampled to fill each epoch."""

    def __init__(self, n: int, rng: np.random.Generator):
        self.n, self.rng = n, rng

    def epoch(self, count: int) -> np.ndarray:
        reps = math.ceil(count / self.n)
        return np.concatenate([self.rng.permutation(self.n) for _ in range(reps)])[:count]


# ----- attention per step -----

def _local_confidence(model: ModelParams, banks, n_src: int) -> np.ndarray:
    w = np.zeros((n_src, len(model.scales)))
    for m in range(n_src):
        for i, r in enumerate(model.scales):
            logits, _ = mlp_forward(model.classifiers[m], banks[m][r])
            w[m, i] = float(np.mean(confidence_weight(softmax(logits.astype(np.float64)))))
    return w


def step_attention(model: ModelParams, banks, variant: str, moments: MomentConfig) -> tuple[AttentionWeights, dict]:
    """Attention weights for one mini-batch plus the discrepancy statistics behind them."""
    n_src = len(banks) - 1
    scales = model.scales
    n_scales = len(scales)
    d_local = np.array([moment_discrepancy([b[r] for b in banks[:n_src]], banks[n_src][r], moments).value
                        for r in scales])
    raw = [sum(b[r] for r in scales) for b in banks]
    d_global = moment_discrepancy(raw[:n_src], raw[n_src], moments).value
    stats = {"d_local": d_local, "d_global": d_global}

    uniform = np.full(n_scales, 1.0 / n_scales)
    if variant == "source_only":
        return AttentionWeights.uniform(scales, n_src), stats
    if variant == "no_local_attention":
        return AttentionWeights(scales, np.tile(uniform, (n_src, 1)), uniform, additive=True), stats

    if variant == "dominance_min":
        w_dom = np.eye(n_scales)[int(np.argmin(d_local))]
    elif variant == "dominance_max":
        w_dom = np.eye(n_scales)[int(np.argmax(d_local))]
    elif variant == "no_dominance":
        w_dom = uniform
    else:
        w_dom = dominance_weights(d_global, d_local)

    if variant == "no_confidence":
        w_conf = np.ones((n_src, n_scales))
    else:
        w_conf = _local_confidence(model, banks, n_src)
    stats["w_conf"] = w_conf
    source = np.stack([combine_weights(w_conf[m], w_dom) for m in range(n_src)])
    return AttentionWeights(scales, source, w_dom.copy(), dominance=w_dom), stats


# ----- training loop -----

@dataclass
class TrainResult:
    model: ModelParams
    metrics: list[dict]
    checkpoint: Checkpoint
    config: RunConfig = field(repr=False, default=None)


def _checkpoint(model, cfg, meta_base, target_weights, additive) -> Checkpoint:
    arrays = {k: v.copy() for k, v in model.named_arrays().items()}
    meta = dict(meta_base, target_weights=[float(x) for x in target_weights], additive=additive)
    return Checkpoint(arrays, meta)


def train(config: RunConfig, sources, target, checkpoint_path=None, metrics_path=None) -> TrainResult:
    """Train on labeled ``sources`` plus an unlabeled ``target``.

    ``sources`` are manifests or :class:`DomainArrays`; ``target`` must be
    unlabeled (its labels are never read). Metrics are one record per epoch.
    """
    if not sources:
        raise DataError("at least one source domain is required")
    src = [_as_domain(s) for s in sources]
    tgt = _as_domain(target, unlabeled=True)
    shapes = {d.frames.shape[1:] for d in src + [tgt]}
    if len(shapes) != 1:
        raise DataError(f"domains disagree on (h, d_f): {sorted(shapes)}")
    h, d_f = shapes.pop()
    n_classes = max(int(s.labels.max()) for s in src) + 1
    for s in sources:
        if isinstance(s, Manifest):
            n_classes = max(n_classes, s.n_classes)

    scales = tuple(sorted(config.scales)) if config.scales else tuple(range(2, h + 1))
    if max(scales) > h:
        raise ConfigError(f"scale {max(scales)} exceeds frame count h={h}")
    variant = config.train_variant
    lambda_df, lambda_dt = config.lambda_df, config.lambda_dt
    if variant == "source_only":
        lambda_df = lambda_dt = 0.0
    moments = MomentConfig(tuple(config.moment_orders))

    model = ModelParams.init(d_f, n_classes, len(src), scales, config.hidden, config.d_t,
                             config.classifier_hidden, seed=config.seed,
                             output_scale=config.init_scale)
    params = model.named_arrays()
    opt = SgdState(config.lr, config.momentum, config.weight_decay)
    rng = np.random.default_rng([config.seed, 1])
    streams = [_IndexStream(len(d.frames), rng) for d in src + [tgt]]
    batch = config.batch_size
    steps = math.ceil(max(len(s.frames) for s in src) / batch)
    meta = {"config": config.to_dict(), "scales": list(scales), "h": h, "d_f": d_f, "n_classes": n_classes,
            "sources": [s.name for s in src], "target": tgt.name, "variant": config.variant}

    additive = variant == "no_local_attention"
    target_w = np.full(len(scales), 1.0 / len(scales))
    last_good = _checkpoint(model, config, meta, target_w, additive)
    metrics = []
    lr = config.lr
    for epoch in range(config.epochs):
        if epoch in config.lr_decay_epochs:
            lr /= 10.0
        opt.lr = lr
        t0 = time.perf_counter()
        order = [s.epoch(steps * batch).reshape(steps, batch) for s in streams]
        sums = {"cls": np.zeros(len(src)), "d_f": 0.0, "d_t": 0.0, "total": 0.0}
        w_target_sum = np.zeros(len(scales))
        for step in range(steps):
            idx = [o[step] for o in order]
            frames = [d.frames[i] for d, i in zip(src + [tgt], idx)]
            clips = [{r: sample_clip_batch(h, r, config.z_max, batch, rng) for r in scales} for _ in frames]
            bset = DomainBatchSet(frames[:-1], [s.labels[i] for s, i in zip(src, idx)], frames[-1], clips)
            enc = encode_domains(model, bset.frames, bset.clips)
            attn, _ = step_attention(model, enc.banks, variant, moments)
            loss, grads = taman_loss(model, bset, attn, lambda_df, lambda_dt, moments, encoded=enc)
            if not math.isfinite(loss.total):
                if checkpoint_path:
                    save_checkpoint(checkpoint_path, last_good)
                raise DivergenceError(f"non-finite loss at epoch {epoch} step {step}")
            sgd_step(params, grads, opt)
            sums["cls"] += loss.cls
            sums["d_f"] += loss.d_f
            sums["d_t"] += loss.d_t
            sums["total"] += loss.total
            w_target_sum += attn.target
        target_w = w_target_sum / w_target_sum.sum()
        record = {
            "epoch": epoch,
            "cls_loss": [float(x) for x in sums["cls"] / steps],
            "d_f": sums["d_f"] / steps,
            "d_t": sums["d_t"] / steps,
            "total": sums["total"] / steps,
            "lambda_df": lambda_df,
            "lambda_dt": lambda_dt,
            "lr": lr,
            "target_scale_weights": [float(x) for x in target_w],
            "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3),
        }
        metrics.append(record)
        log.info("epoch %d %s", epoch, json.dumps({k: record[k] for k in ("total", "d_t")}))
        last_good = _checkpoint(model, config, meta, target_w, additive)
        if checkpoint_path:
            save_checkpoint(checkpoint_path, last_good)
        if metrics_path:
            write_metrics(metrics_path, metrics)
    return TrainResult(model, metrics, last_good, config)


def recombined_total(record: dict) -> float:
    """Recompute an epoch's total from its components."""
    return math.fsum(record["cls_loss"]) + record["lambda_df"] * record["d_f"] + record["lambda_dt"] * record["d_t"]


__all__ = ["RunConfig", "TrainResult", "train", "load_domain", "step_attention", "VARIANTS", "TRAIN_VARIANTS",
           "ENSEMBLE_VARIANTS", "LossBreakdown", "recombined_total"]
