"""Model-backed user/item profiles built from training reviews only.

Two stages per owner: feature extraction over the owner's training history
(capped at the first 15 reviews in source order), then summarization of the
extracted block down to a single sentence. Owners with no training reviews
get an unavailable profile and no backend call; downstream prompt rendering
substitutes a fixed placeholder.
"""

from __future__ import annotations

import csv
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .promptkit import PROFILE_PLACEHOLDER
from .views import DatasetView

MAX_PROFILE_REVIEWS = 15
_EMPTY_RETRIES = 3

EXTRACTION_TEMPLATE = (
    "Below are reviews written {direction} {kind} {owner}, each with the "
    "{counterpart} it concerns.\n{reviews}\n"
    "Extract the features of this {kind} that influence the ratings involved.\n"
)
SUMMARY_TEMPLATE = (
    "Summarize the following {kind} features in one sentence:\n{extracted}\n"
)

_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")


@dataclass(frozen=True)
class Profile:
    owner_kind: str            # "user" | "item"
    owner: int                 # interned id
    extracted: str | None
    summary: str | None
    source_positions: tuple[int, ...]
    cap_applied: bool

    @property
    def available(self) -> bool:
        return self.summary is not None


def first_sentence(text: str) -> str:
    """Trim a completion to its first sentence; boundary is terminal
    punctuation followed by whitespace or end of text."""
    text = text.strip()
    m = _SENTENCE_END.search(text)
    return text[: m.end()] if m else text


def _history_block(view: DatasetView, owner_kind: str, positions: list[int]) -> str:
    ds = view.parent
    lines = []
    for p in positions:
        r = view.review_at(p)
        counterpart = ds.item_ids[r.item] if owner_kind == "user" else ds.user_ids[r.user]
        lines.append(f"- [{counterpart}] {r.text}")
    return "\n".join(lines)


def extract_features(backend, owner_kind: str, owner: int, view: DatasetView) -> Profile:
    """Stage 1: render the extraction prompt over the capped history and
    return the backend completion as the extracted block."""
    positions = view.user_positions(owner) if owner_kind == "user" else view.item_positions(owner)
    if not positions:
        return Profile(owner_kind, owner, None, None, (), False)
    cap_applied = len(positions) > MAX_PROFILE_REVIEWS
    positions = positions[:MAX_PROFILE_REVIEWS]
    label = view.parent.user_ids[owner] if owner_kind == "user" else view.parent.item_ids[owner]
    prompt = EXTRACTION_TEMPLATE.format(
        direction="by" if owner_kind == "user" else "for",
        kind=owner_kind,
        owner=label,
        counterpart="item" if owner_kind == "user" else "user",
        reviews=_history_block(view, owner_kind, positions),
    )
    extracted = backend.complete(prompt)
    return Profile(owner_kind, owner, extracted, None, tuple(positions), cap_applied)


def summarize(backend, profile: Profile) -> Profile:
    """Stage 2: one-sentence summary of the extracted block.

    An empty completion is retried up to 3 times before the profile is
    marked unavailable.
    """
    if profile.extracted is None or not profile.extracted.strip():
        return profile
    prompt = SUMMARY_TEMPLATE.format(kind=profile.owner_kind, extracted=profile.extracted)
    summary = ""
    for _ in range(_EMPTY_RETRIES):
        summary = first_sentence(backend.complete(prompt))
        if summary:
            break
    if not summary:
        return profile
    return Profile(profile.owner_kind, profile.owner, profile.extracted, summary,
                   profile.source_positions, profile.cap_applied)


def build_profiles(backend, train: DatasetView, max_in_flight: int = 1) -> dict[tuple[str, int], Profile]:
    """Profiles for every training user and item, assembled in owner order
    regardless of completion order."""
    owners = [("user", u) for u in sorted(train.users())] + [("item", i) for i in sorted(train.items())]

    def build(owner):
        kind, oid = owner
        return summarize(backend, extract_features(backend, kind, oid, train))

    if max_in_flight <= 1:
        results = [build(o) for o in owners]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(build, owners))
    return {(p.owner_kind, p.owner): p for p in results}


def summary_table(profiles: dict[tuple[str, int], Profile]) -> dict[tuple[str, int], str]:
    """Summaries for prompt rendering; unavailable profiles get the placeholder."""
    return {k: (p.summary if p.available else PROFILE_PLACEHOLDER) for k, p in profiles.items()}


def write_profiles_csv(profiles: dict[tuple[str, int], Profile], view: DatasetView,
                       path: str | Path) -> None:
    """Persisted contract consumed by the fine-tuning trainer."""
    ds = view.parent
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["owner_kind", "owner_source_id", "summary", "n_source_reviews", "cap_applied"])
        for (kind, oid), p in sorted(profiles.items()):
            source_id = ds.user_ids[oid] if kind == "user" else ds.item_ids[oid]
            w.writerow([kind, source_id, p.summary if p.available else PROFILE_PLACEHOLDER,
                        len(p.source_positions), int(p.cap_applied)])
