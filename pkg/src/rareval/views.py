"""Read-only views over a Dataset: a fold (position list) plus optional
text overrides, so perturbations never copy or mutate the parent records."""

from __future__ import annotations

from .corpus import Dataset, Review


class DatasetView:
    """Positions into a parent Dataset, with per-position text overrides.

    Ratings, ids, and fold membership always come from the parent; only the
    review text may differ (removal blanks it, distortion permutes it).
    """

    def __init__(self, parent: Dataset, positions: list[int],
                 text_override: dict[int, str] | None = None):
        self.parent = parent
        self.positions = tuple(positions)
        self.text_override = dict(text_override) if text_override else {}
        self._pos_set = frozenset(self.positions)
        self._user_positions: dict[int, list[int]] = {}
        self._item_positions: dict[int, list[int]] = {}
        for p in self.positions:
            r = parent.reviews[p]
            self._user_positions.setdefault(r.user, []).append(p)
            self._item_positions.setdefault(r.item, []).append(p)

    def __len__(self) -> int:
        return len(self.positions)

    def __contains__(self, pos: int) -> bool:
        return pos in self._pos_set

    def review_at(self, pos: int) -> Review:
        r = self.parent.reviews[pos]
        if pos in self.text_override:
            r = Review(r.user, r.item, r.rating, self.text_override[pos], r.timestamp, r.review_index)
        return r

    def text_at(self, pos: int) -> str:
        if pos in self.text_override:
            return self.text_override[pos]
        return self.parent.reviews[pos].text

    def reviews(self):
        for p in self.positions:
            yield p, self.review_at(p)

    def user_positions(self, user: int) -> list[int]:
        """Positions of the user's reviews inside this view, parent order."""
        return list(self._user_positions.get(user, []))

    def item_positions(self, item: int) -> list[int]:
        return list(self._item_positions.get(item, []))

    def users(self):
        return self._user_positions.keys()

    def items(self):
        return self._item_positions.keys()

    def with_overrides(self, overrides: dict[int, str]) -> "DatasetView":
        merged = dict(self.text_override)
        merged.update(overrides)
        return DatasetView(self.parent, list(self.positions), merged)


def full_view(dataset: Dataset) -> DatasetView:
    return DatasetView(dataset, list(range(len(dataset))))
