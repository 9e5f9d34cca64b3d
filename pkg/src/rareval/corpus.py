"""Ingest raw review dumps into an indexed, immutable in-memory dataset.

A dataset is the ordered list of (user, item, rating, text) records that
survived ingestion filtering, plus per-user and per-item position indexes and
bidirectional id tables mapping source string ids to interned integers.
Records whose text is empty after whitespace trimming are dropped; records
with ratings outside [1, 5] are rejected and counted.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

AMAZON_2014 = "amazon-2014-jsonlines"
GENERIC_CSV = "generic-csv"

CSV_COLUMNS = ["user", "item", "rating", "text", "timestamp"]


class IngestionError(Exception):
    """Unreadable input, or a malformed record in strict mode."""


class UnknownIdError(KeyError):
    """Lookup of a user or item absent from the dataset."""


@dataclass(frozen=True)
class Review:
    """One (user, item, rating, text) record.

    ``user`` and ``item`` are interned integers; the dataset's id tables map
    them back to source string ids. ``review_index`` is the ordinal position
    of the record in the source file, stable across filtering.
    """

    user: int
    item: int
    rating: float
    text: str
    timestamp: int | None
    review_index: int


@dataclass(frozen=True)
class IngestReport:
    kept: int
    dropped_empty_text: int
    rejected_bad_rating: int
    malformed: int
    errors: tuple[str, ...] = ()


class Dataset:
    """Immutable indexed review collection.

    ``user_index[u]`` is the ordered list of positions of u's reviews (the
    user history); ``item_index[i]`` the item-side equivalent. Positions are
    indexes into ``reviews``, which preserves source order.
    """

    def __init__(self, reviews: list[Review], user_ids: list[str], item_ids: list[str]):
        self.reviews: tuple[Review, ...] = tuple(reviews)
        self.user_ids = tuple(user_ids)   # interned id -> source string id
        self.item_ids = tuple(item_ids)
        self.user_id_of = {s: n for n, s in enumerate(user_ids)}
        self.item_id_of = {s: n for n, s in enumerate(item_ids)}
        self.user_index: dict[int, list[int]] = {}
        self.item_index: dict[int, list[int]] = {}
        for pos, r in enumerate(self.reviews):
            self.user_index.setdefault(r.user, []).append(pos)
            self.item_index.setdefault(r.item, []).append(pos)

    def __len__(self) -> int:
        return len(self.reviews)

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    def user_history(self, user: int) -> list[Review]:
        """D_u: the user's reviews in source order."""
        if user not in self.user_index:
            raise UnknownIdError(user)
        return [self.reviews[p] for p in self.user_index[user]]

    def item_history(self, item: int) -> list[Review]:
        """D_i: the item's reviews in source order."""
        if item not in self.item_index:
            raise UnknownIdError(item)
        return [self.reviews[p] for p in self.item_index[item]]

    def subset(self, positions: list[int]) -> "Dataset":
        """New Dataset from a subset of review positions, re-interned in
        first-appearance order, review_index values preserved."""
        user_ids: list[str] = []
        item_ids: list[str] = []
        umap: dict[str, int] = {}
        imap: dict[str, int] = {}
        out: list[Review] = []
        for p in positions:
            r = self.reviews[p]
            us, its = self.user_ids[r.user], self.item_ids[r.item]
            if us not in umap:
                umap[us] = len(user_ids)
                user_ids.append(us)
            if its not in imap:
                imap[its] = len(item_ids)
                item_ids.append(its)
            out.append(Review(umap[us], imap[its], r.rating, r.text, r.timestamp, r.review_index))
        return Dataset(out, user_ids, item_ids)

    def record_key(self, pos: int) -> tuple:
        """Identity of a record independent of interning (for equality tests)."""
        r = self.reviews[pos]
        return (self.user_ids[r.user], self.item_ids[r.item], r.rating, r.text, r.timestamp)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            len(self) == len(other)
            and all(self.record_key(p) == other.record_key(p) for p in range(len(self)))
            and self.user_ids == other.user_ids
            and self.item_ids == other.item_ids
        )


@dataclass
class _Interner:
    ids: list[str] = field(default_factory=list)
    table: dict[str, int] = field(default_factory=dict)

    def intern(self, s: str) -> int:
        if s not in self.table:
            self.table[s] = len(self.ids)
            self.ids.append(s)
        return self.table[s]


def _parse_amazon_line(line: str) -> dict:
    rec = json.loads(line)
    return {
        "user": str(rec["reviewerID"]),
        "item": str(rec["asin"]),
        "rating": rec["overall"],
        "text": rec.get("reviewText", ""),
        "timestamp": rec.get("unixReviewTime"),
    }


def _iter_records(path: Path, format: str):
    if format == AMAZON_2014:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    yield _parse_amazon_line(line)
    elif format == GENERIC_CSV:
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                yield {
                    "user": row["user"],
                    "item": row["item"],
                    "rating": row["rating"],
                    "text": row.get("text", ""),
                    "timestamp": row.get("timestamp") or None,
                }
    else:
        raise IngestionError(f"unknown format: {format!r}")


def ingest(path: str | Path, format: str = AMAZON_2014, strict: bool = False) -> tuple[Dataset, IngestReport]:
    """Read a raw dump, dropping empty-text and out-of-range-rating records.

    Interned ids are assigned in first-appearance order among kept records,
    so ingestion of the same bytes always yields an identical Dataset.
    Malformed records are collected as per-record errors unless ``strict``.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"no such file: {path}")

    users, items = _Interner(), _Interner()
    reviews: list[Review] = []
    dropped = rejected = malformed = 0
    errors: list[str] = []

    source_index = -1
    try:
        record_iter = _iter_records(path, format)
        while True:
            source_index += 1
            try:
                rec = next(record_iter)
            except StopIteration:
                break
            except (json.JSONDecodeError, KeyError, UnicodeDecodeError) as exc:
                if strict:
                    raise IngestionError(f"record {source_index}: {exc}") from exc
                malformed += 1
                errors.append(f"record {source_index}: {exc}")
                continue
            try:
                rating = float(rec["rating"])
            except (TypeError, ValueError) as exc:
                if strict:
                    raise IngestionError(f"record {source_index}: bad rating") from exc
                malformed += 1
                errors.append(f"record {source_index}: bad rating {rec['rating']!r}")
                continue
            if not (1.0 <= rating <= 5.0):
                rejected += 1
                continue
            text = (rec["text"] or "").strip()
            if not text:
                dropped += 1
                continue
            ts = rec.get("timestamp")
            ts = int(ts) if ts not in (None, "") else None
            reviews.append(
                Review(users.intern(rec["user"]), items.intern(rec["item"]), rating, text, ts, source_index)
            )
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc

    report = IngestReport(len(reviews), dropped, rejected, malformed, tuple(errors))
    return Dataset(reviews, users.ids, items.ids), report


def export_csv(dataset: Dataset, path: str | Path) -> None:
    """Canonical export: UTF-8 CSV with LF endings, columns user,item,rating,text,timestamp."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in dataset.reviews:
            rating = int(r.rating) if r.rating == int(r.rating) else r.rating
            w.writerow([dataset.user_ids[r.user], dataset.item_ids[r.item], rating, r.text,
                        "" if r.timestamp is None else r.timestamp])


def export_csv_string(dataset: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in dataset.reviews:
        rating = int(r.rating) if r.rating == int(r.rating) else r.rating
        w.writerow([dataset.user_ids[r.user], dataset.item_ids[r.item], rating, r.text,
                    "" if r.timestamp is None else r.timestamp])
    return buf.getvalue()
