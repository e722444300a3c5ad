"""Target-domain evaluation with the multi-classifier ensemble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ensemble import ensemble_predict, variant_weights
from ..errors import CompatibilityError, DataError
from ..model import ModelParams, encode_domains
from ..numkernel import mlp_forward, softmax
from ..temporal import eval_clip_batch
from .formats import Checkpoint, Manifest, load_checkpoint
from .synthetic import DomainArrays
from .training import load_domain


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: list[float]
    mean_ensemble_weights: list[float]
    predictions: np.ndarray
    per_classifier_accuracy: list[float]
    n: int

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "per_class_accuracy": self.per_class_accuracy,
                "mean_ensemble_weights": self.mean_ensemble_weights,
                "per_classifier_accuracy": self.per_classifier_accuracy, "n": self.n}


def model_from_checkpoint(ckpt: Checkpoint) -> ModelParams:
    return ModelParams.from_arrays(ckpt.meta["scales"], ckpt.arrays)


def predict_proba(ckpt: Checkpoint, data: DomainArrays, chunk: int = 256) -> np.ndarray:
    """Per-classifier class probabilities, shape (N, M, K), with eval-deterministic clips."""
    model = model_from_checkpoint(ckpt)
    meta = ckpt.meta
    z_max = meta["config"]["z_max"]
    h = data.frames.shape[1]
    weights = np.asarray(meta["target_weights"])
    out = []
    for start in range(0, len(data.frames), chunk):
        frames = data.frames[start:start + chunk]
        ids = data.video_ids[start:start + chunk]
        clips = {r: eval_clip_batch(ids, h, r, z_max) for r in model.scales}
        bank = encode_domains(model, [frames], [clips]).banks[0]
        if meta["additive"]:
            t = sum(bank[r] for r in model.scales)
        else:
            t = sum(bank[r] * bank[r].dtype.type(w) for r, w in zip(model.scales, weights))
        probs = [softmax(mlp_forward(c, t)[0].astype(np.float64)) for c in model.classifiers]
        out.append(np.stack(probs, axis=1))
    return np.concatenate(out)


def evaluate(checkpoint, test, ensemble_mode: str = "certainty", aux=None) -> EvalReport:
    """Top-1 accuracy of the ensembled prediction on a labeled test split."""
    ckpt = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint)
    if isinstance(test, Manifest):
        if test.n_classes != ckpt.meta["n_classes"]:
            raise CompatibilityError(f"manifest has {test.n_classes} classes, checkpoint {ckpt.meta['n_classes']}")
        if test.role == "target-train":
            raise DataError("evaluation needs a labeled manifest")
        test = load_domain(test)
    if test.labels is None:
        raise DataError("evaluation needs labels")
    if test.frames.shape[2] != ckpt.meta["d_f"] or test.frames.shape[1] < max(ckpt.meta["scales"]):
        raise CompatibilityError(f"features shaped {test.frames.shape[1:]} do not fit the checkpoint "
                                 f"(d_f={ckpt.meta['d_f']}, scales up to {max(ckpt.meta['scales'])})")
    if test.labels.max() >= ckpt.meta["n_classes"]:
        raise CompatibilityError("test labels exceed the checkpoint's class count")

    probs = predict_proba(ckpt, test)
    weights = variant_weights(probs, ensemble_mode, aux)
    _, pred = ensemble_predict(probs, weights)
    labels = test.labels
    k = ckpt.meta["n_classes"]
    per_class = [float(np.mean(pred[labels == c] == c)) if np.any(labels == c) else float("nan") for c in range(k)]
    per_clf = [float(np.mean(np.argmax(probs[:, j], axis=1) == labels)) for j in range(probs.shape[1])]
    return EvalReport(float(np.mean(pred == labels)), per_class, weights.mean(axis=0).tolist(), pred, per_clf,
                      len(labels))
