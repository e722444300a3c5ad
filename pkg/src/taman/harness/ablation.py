"""Run a set of training variants over several seeds and tabulate target accuracy."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .evaluation import evaluate
from .training import ENSEMBLE_VARIANTS, VARIANTS, RunConfig, TrainResult, train

log = logging.getLogger(__name__)


@dataclass
class AblationRow:
    variant: str
    accuracies: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "mean": self.mean, "std": self.std, "accuracies": self.accuracies}


class AblationRunner:
    """Trains each (variant, seed) once and reuses it across evaluation-only variants."""

    def __init__(self, config: RunConfig, sources, target_train, target_test):
        self.config = config
        self.sources = list(sources)
        self.target_train = target_train
        self.target_test = target_test
        self._trained: dict[tuple, TrainResult] = {}

    def trained(self, variant: str, seed: int, sources=None) -> TrainResult:
        sources = self.sources if sources is None else sources
        key = (variant, seed, tuple(id(s) for s in sources))
        if key not in self._trained:
            cfg = dataclasses.replace(self.config, variant=variant, seed=seed)
            log.info("training variant=%s seed=%d", variant, seed)
            self._trained[key] = train(cfg, sources, self.target_train)
        return self._trained[key]

    def source_only_accuracies(self, seed: int) -> list[float]:
        """Target accuracy of a source-only model trained on each source alone."""
        accs = []
        for src in self.sources:
            result = self.trained("source_only", seed, [src])
            accs.append(evaluate(result.checkpoint, self.target_test, "average").accuracy)
        return accs

    def accuracy(self, variant: str, seed: int) -> float:
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
        if variant in ENSEMBLE_VARIANTS:
            mode = ENSEMBLE_VARIANTS[variant]
            aux = self.source_only_accuracies(seed) if mode == "source_accuracy" else None
            return evaluate(self.trained("full", seed).checkpoint, self.target_test, mode, aux).accuracy
        return evaluate(self.trained(variant, seed).checkpoint, self.target_test, "certainty").accuracy

    def run(self, variants, seeds) -> list[AblationRow]:
        return [AblationRow(v, [self.accuracy(v, s) for s in seeds]) for v in variants]


def run_ablation(config: RunConfig, variants, seeds, sources, target_train, target_test) -> list[AblationRow]:
    return AblationRunner(config, sources, target_train, target_test).run(variants, seeds)


def format_table(rows: list[AblationRow]) -> str:
    width = max(len(r.variant) for r in rows)
    lines = [f"{'variant':<{width}}  mean acc (%)   std"]
    for r in rows:
        lines.append(f"{r.variant:<{width}}  {100 * r.mean:11.2f}  {100 * r.std:5.2f}")
    return "\n".join(lines)
