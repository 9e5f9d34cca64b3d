"""Bipartite k-core filtering of a review dataset.

Users and items are the two node sides; every review is one edge (duplicate
(user, item) pairs each count once per review). Filtering iteratively prunes
nodes with fewer than k interactions until a fixed point; the surviving set
is the unique maximal sub-dataset, independent of pruning order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import Dataset


@dataclass(frozen=True)
class CoreSpec:
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")


@dataclass(frozen=True)
class CoreStats:
    user_count: int
    item_count: int
    review_count: int
    user_degree_hist: dict[int, int]
    item_degree_hist: dict[int, int]


def kcore_filter(dataset: Dataset, spec: CoreSpec) -> Dataset:
    """Peel to the k-core: worklist of under-degree nodes, pruned to a fixed point.

    Review order is preserved; the result may be empty.
    """
    k = spec.k
    if k == 0:
        return dataset

    udeg = {u: len(ps) for u, ps in dataset.user_index.items()}
    ideg = {i: len(ps) for i, ps in dataset.item_index.items()}
    dead_users: set[int] = set()
    dead_items: set[int] = set()
    work: list[tuple[str, int]] = [("u", u) for u, d in udeg.items() if d < k]
    work += [("i", i) for i, d in ideg.items() if d < k]

    while work:
        side, node = work.pop()
        if side == "u":
            if node in dead_users:
                continue
            dead_users.add(node)
            for p in dataset.user_index[node]:
                other = dataset.reviews[p].item
                if other in dead_items:
                    continue
                ideg[other] -= 1
                if ideg[other] < k:
                    work.append(("i", other))
        else:
            if node in dead_items:
                continue
            dead_items.add(node)
            for p in dataset.item_index[node]:
                other = dataset.reviews[p].user
                if other in dead_users:
                    continue
                udeg[other] -= 1
                if udeg[other] < k:
                    work.append(("u", other))

    keep = [
        p
        for p, r in enumerate(dataset.reviews)
        if r.user not in dead_users and r.item not in dead_items
    ]
    return dataset.subset(keep)


def core_stats(dataset: Dataset) -> CoreStats:
    """Exact node/edge counts plus degree histograms for both sides."""
    uh = Counter(len(ps) for ps in dataset.user_index.values())
    ih = Counter(len(ps) for ps in dataset.item_index.values())
    return CoreStats(dataset.n_users, dataset.n_items, len(dataset), dict(uh), dict(ih))
