"""Training-fold review-text perturbations: removal and distortion.

Removal blanks the text of a seeded selection of reviews in place, keeping
every rating and (user, item) pair; combined with a rating-only prompt it
realizes the review-free setting. Distortion permutes the texts of a seeded
selection among themselves, so the fold-level text multiset is preserved
while text/pair alignment is broken. Both are pure functions of
(input view, spec) and consume the package's counter-based generator, so a
manifest replays exactly in any implementation of the same PRNG.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .rng import CounterRng, derive_seed
from .views import DatasetView

REMOVE = "remove"
DISTORT = "distort"


@dataclass(frozen=True)
class PerturbSpec:
    kind: str
    fraction: float
    seed: int
    scope: str = "train"

    def __post_init__(self):
        if self.kind not in (REMOVE, DISTORT):
            raise ValueError(f"unknown perturbation kind: {self.kind!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")


def _select(view: DatasetView, spec: PerturbSpec) -> list[int]:
    """Seeded selection of floor(fraction * N) view positions."""
    n_pick = math.floor(spec.fraction * len(view))
    rng = CounterRng(derive_seed(spec.seed, f"perturb-select-{spec.kind}"))
    return rng.sample(list(view.positions), n_pick)


def remove_reviews(train: DatasetView, spec: PerturbSpec) -> DatasetView:
    """Blank the text of exactly floor(fraction * N) training reviews."""
    assert spec.kind == REMOVE
    selected = _select(train, spec)
    return train.with_overrides({p: "" for p in selected})


def distort_reviews(train: DatasetView, spec: PerturbSpec) -> DatasetView:
    """Permute the texts of a seeded selection among themselves.

    Uniform random permutation, not a forced derangement: a text may land
    back on its own pair.
    """
    assert spec.kind == DISTORT
    selected = _select(train, spec)
    perm = list(selected)
    CounterRng(derive_seed(spec.seed, "perturb-shuffle")).shuffle(perm)
    overrides = {dest: train.text_at(src) for dest, src in zip(selected, perm)}
    return train.with_overrides(overrides)


def apply(train: DatasetView, spec: PerturbSpec) -> DatasetView:
    if spec.kind == REMOVE:
        return remove_reviews(train, spec)
    return distort_reviews(train, spec)


def write_manifest(train: DatasetView, spec: PerturbSpec, path: str | Path) -> None:
    """Persist (review_index, action, source_index_for_text) for exact replay."""
    selected = _select(train, spec)
    rows: list[tuple[int, str, str]] = []
    if spec.kind == REMOVE:
        for p in selected:
            rows.append((train.parent.reviews[p].review_index, "blank", ""))
    else:
        perm = list(selected)
        CounterRng(derive_seed(spec.seed, "perturb-shuffle")).shuffle(perm)
        for dest, src in zip(selected, perm):
            rows.append((train.parent.reviews[dest].review_index, "take_text",
                         str(train.parent.reviews[src].review_index)))
    rows.sort()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["review_index", "action", "source_index_for_text"])
        w.writerows(rows)
