"""Deterministic seeded train/validation/test partition at review granularity.

Positions are shuffled by the package's counter-based generator (Fisher-Yates)
and cut by floor arithmetic: validation and test get floor(N * ratio), train
the remainder. Same dataset and seed always give the same partition.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Dataset
from .rng import CounterRng
from .views import DatasetView


class SplitSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if any(r < 0 for r in self.ratios):
            raise SplitSpecError("ratios must be non-negative")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise SplitSpecError("ratios must sum to 1")


@dataclass(frozen=True)
class SplitResult:
    train: DatasetView
    validation: DatasetView
    test: DatasetView
    spec: SplitSpec = field(compare=False)

    def fold_of(self, pos: int) -> str:
        if pos in self.train:
            return "train"
        if pos in self.validation:
            return "validation"
        return "test"


def split(dataset: Dataset, spec: SplitSpec) -> SplitResult:
    n = len(dataset)
    order = list(range(n))
    CounterRng(spec.seed).shuffle(order)
    n_val = math.floor(n * spec.ratios[1])
    n_test = math.floor(n * spec.ratios[2])
    n_train = n - n_val - n_test
    # views keep parent order within each fold for reproducible history rendering
    train = sorted(order[:n_train])
    val = sorted(order[n_train:n_train + n_val])
    test = sorted(order[n_train + n_val:])
    return SplitResult(
        DatasetView(dataset, train),
        DatasetView(dataset, val),
        DatasetView(dataset, test),
        spec,
    )


def write_manifest(result: SplitResult, path: str | Path) -> None:
    """Persist (review_index, fold) rows for cross-run/cross-language replay."""
    rows = []
    for name, view in (("train", result.train), ("validation", result.validation), ("test", result.test)):
        for p in view.positions:
            rows.append((result.train.parent.reviews[p].review_index, name))
    rows.sort()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["review_index", "fold"])
        w.writerows(rows)
