"""Multi-dataset 0-shot / k-shot evaluation and the report it produces."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..seeds import derive_seed
from .classify import argmax_labels, k_shot_finetune, predict_head, zero_shot_scores
from .metrics import macro_f1

SHOTS = (0, 1, 2, 3, 5, 10)


def shot_column(k: int) -> str:
    return f"{k}-shot"


@dataclass
class EvalReport:
    """Macro-F1 per dataset and shot, averaged over evaluation seeds, plus cross-dataset means."""

    shots: tuple
    seeds: tuple
    per_seed: dict  # dataset -> shot -> [score per seed]
    config_digest: str = ""
    label: str = ""
    per_dataset: dict = field(init=False)
    mean: dict = field(init=False)

    def __post_init__(self):
        self.shots = tuple(int(s) for s in self.shots)
        self.seeds = tuple(self.seeds)
        self.per_dataset = {
            name: {k: math.fsum(scores[k]) / len(scores[k]) for k in self.shots}
            for name, scores in sorted(self.per_seed.items())
        }
        self.mean = {k: math.fsum(d[k] for d in self.per_dataset.values()) / len(self.per_dataset)
                     for k in self.shots}
        for name, d in self.per_dataset.items():
            for k, v in d.items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"score out of range for {name} {k}-shot: {v}")

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "config_digest": self.config_digest,
            "shots": list(self.shots),
            "seeds": list(self.seeds),
            "per_seed": {n: {str(k): v for k, v in d.items()} for n, d in sorted(self.per_seed.items())},
            "per_dataset": {n: {shot_column(k): v for k, v in d.items()} for n, d in self.per_dataset.items()},
            "mean": {shot_column(k): v for k, v in self.mean.items()},
        }

    @classmethod
    def from_json(cls, obj) -> "EvalReport":
        per_seed = {n: {int(k): list(v) for k, v in d.items()} for n, d in obj["per_seed"].items()}
        return cls(obj["shots"], obj["seeds"], per_seed, obj.get("config_digest", ""), obj.get("label", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"

    def table_csv(self) -> str:
        """Rows per dataset plus a ``mean`` row; columns ``0-shot`` .. ``10-shot``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset"] + [shot_column(k) for k in self.shots])
        for name, d in self.per_dataset.items():
            w.writerow([name] + [f"{d[k]:.4f}" for k in self.shots])
        w.writerow(["mean"] + [f"{self.mean[k]:.4f}" for k in self.shots])
        return buf.getvalue()


def evaluate_dataset(state, dataset, shot: int, seed: int, finetune_kwargs=None) -> float:
    test_ids = dataset.ids("test")
    X = [dataset.aligned(rid).frames for rid in test_ids]
    labels = [dataset.record(rid).label for rid in test_ids]
    if shot == 0:
        classes, scores = zero_shot_scores(state, X, dataset.label_texts)
        preds = argmax_labels(classes, scores)
    else:
        tuned, head = k_shot_finetune(state, dataset, shot, seed, **(finetune_kwargs or {}))
        preds = predict_head(tuned, head, X)
    return macro_f1(preds, labels, dataset.label_set)


def evaluate(state, datasets, shots=SHOTS, seeds=(0,), finetune_kwargs=None, config_digest: str = "",
             label: str = "") -> EvalReport:
    """Score every dataset at every shot and seed.

    Each k-shot run fine-tunes a private copy of ``state``; per-run seeds are
    derived from (seed, dataset name, shot) so dataset order does not matter.
    Any failure propagates: a report never silently omits a dataset.
    """
    datasets = list(datasets)
    if not datasets:
        raise ConfigError("evaluate needs at least one dataset")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ConfigError(f"dataset names must be unique: {names}")
    per_seed = {}
    for ds in sorted(datasets, key=lambda d: d.name):
        per_seed[ds.name] = {
            k: [evaluate_dataset(state, ds, k, derive_seed(s, ds.name, k), finetune_kwargs) for s in seeds]
            for k in shots
        }
    return EvalReport(tuple(shots), tuple(seeds), per_seed, config_digest, label)
