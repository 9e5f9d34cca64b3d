"""Renders the three prompt families: zero-shot, few-shot with sampled
demonstrations, and the profile-plus-rating-history input for the fine-tuned
predictor, under fixed review-count caps and a review-text token budget.

The token estimator is pluggable; the default heuristic is ceil(bytes / 4)
per review, which only gates truncation. Template wording is a versioned
fixture of this package, not normative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .corpus import Review
from .rng import CounterRng
from .views import DatasetView

TEMPLATE_VERSION = "1"

PROFILE_PLACEHOLDER = "no information available"

ROLE_TARGET_USER = "target-user"
ROLE_TARGET_ITEM = "target-item"
ROLE_DEMO = "demo"

_HEADER = (
    "You are a rating prediction assistant. Based on the information below, "
    "predict the rating (1 to 5) that the user would assign to the item.\n"
)
_QUERY = (
    "\nHow would user {user} rate item {item}, on a scale of 1 to 5? "
    "Answer with a single number.\n"
)
_NO_REVIEWS = "(no reviews)\n"


def default_token_estimator(text: str) -> int:
    """Heuristic token count: one token per 4 UTF-8 bytes, rounded up."""
    return math.ceil(len(text.encode("utf-8")) / 4)


@dataclass(frozen=True)
class BudgetPolicy:
    max_review_tokens: int = 7680
    zero_shot_reviews: tuple[int, int] = (10, 10)
    few_shot_target_reviews: tuple[int, int] = (6, 6)
    shots: int = 3
    per_shot_reviews: tuple[int, int] = (2, 2)
    max_history_ratings: tuple[int, int] = (32, 32)
    token_estimator: Callable[[str], int] = field(default=default_token_estimator, compare=False)

    def __post_init__(self):
        if self.max_review_tokens <= 0:
            raise ValueError("max_review_tokens must be positive")
        counts = (self.shots, *self.zero_shot_reviews, *self.few_shot_target_reviews,
                  *self.per_shot_reviews, *self.max_history_ratings)
        if any(c < 0 for c in counts):
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    included: tuple[tuple[int, str], ...]   # (review position, role)
    token_estimate: int
    truncated: bool
    target_user: int
    target_item: int
    demo_shortfall: int = 0


def _most_recent(view: DatasetView, positions: list[int], cap: int) -> list[int]:
    """Up to `cap` most recent positions; timestamp when present, else source
    order stands in for recency. Selected reviews render in source order."""
    def recency(p: int):
        ts = view.parent.reviews[p].timestamp
        return (0 if ts is None else 1, ts if ts is not None else p, p)
    chosen = sorted(positions, key=recency)[-cap:] if cap else []
    return sorted(chosen)


def _review_line(view: DatasetView, pos: int) -> str:
    r = view.review_at(pos)
    text = r.text if r.text else "(review withheld)"
    return f"- rating {r.rating:g}: {text}\n"


class _Assembler:
    """Accumulates prompt parts, tracking the review-text token budget.

    Reviews are added greedily in render order; once the budget is exhausted
    the remaining reviews (the tail) are dropped and the prompt is marked
    truncated.
    """

    def __init__(self, policy: BudgetPolicy):
        self.policy = policy
        self.parts: list[str] = []
        self.included: list[tuple[int, str]] = []
        self.review_tokens = 0
        self.truncated = False

    def add(self, text: str) -> None:
        self.parts.append(text)

    def add_reviews(self, view: DatasetView, positions: list[int], role: str) -> None:
        if not positions:
            self.add(_NO_REVIEWS)
            return
        added = 0
        for p in positions:
            line = _review_line(view, p)
            cost = self.policy.token_estimator(line)
            if self.review_tokens + cost > self.policy.max_review_tokens:
                self.truncated = True
                break
            self.review_tokens += cost
            self.parts.append(line)
            self.included.append((p, role))
            added += 1
        if added == 0:
            self.add(_NO_REVIEWS)

    def render(self, u: int, i: int, shortfall: int = 0) -> RenderedPrompt:
        return RenderedPrompt(
            text="".join(self.parts),
            included=tuple(self.included),
            token_estimate=self.review_tokens,
            truncated=self.truncated,
            target_user=u,
            target_item=i,
            demo_shortfall=shortfall,
        )


def _target_positions(train: DatasetView, u: int, i: int, caps: tuple[int, int]):
    """Target-side history positions with the (u, i) pair's own reviews excluded."""
    upos = [p for p in train.user_positions(u) if train.parent.reviews[p].item != i]
    ipos = [p for p in train.item_positions(i) if train.parent.reviews[p].user != u]
    return _most_recent(train, upos, caps[0]), _most_recent(train, ipos, caps[1])


def _target_sections(asm: _Assembler, train: DatasetView, u: int, i: int,
                     caps: tuple[int, int], user_label: str, item_label: str) -> None:
    upos, ipos = _target_positions(train, u, i, caps)
    asm.add(f"Reviews written by user {user_label}:\n")
    asm.add_reviews(train, upos, ROLE_TARGET_USER)
    asm.add(f"Reviews written for item {item_label}:\n")
    asm.add_reviews(train, ipos, ROLE_TARGET_ITEM)


def build_zero_shot(u: int, i: int, train: DatasetView, policy: BudgetPolicy) -> RenderedPrompt:
    """User id, item id, up to 10+10 most recent training reviews, rating query."""
    ds = train.parent
    user_label, item_label = ds.user_ids[u], ds.item_ids[i]
    asm = _Assembler(policy)
    asm.add(_HEADER)
    asm.add(f"User: {user_label}\nItem: {item_label}\n")
    _target_sections(asm, train, u, i, policy.zero_shot_reviews, user_label, item_label)
    asm.add(_QUERY.format(user=user_label, item=item_label))
    return asm.render(u, i)


def build_few_shot(gen: CounterRng, u: int, i: int, train: DatasetView,
                   policy: BudgetPolicy) -> RenderedPrompt:
    """`shots` sampled demonstrations, none involving u or i, then the query.

    Each demonstration shows up to 2+2 reviews around one training interaction
    and its true rating; the final query mirrors zero-shot with the 6+6 cap.
    If fewer eligible interactions exist, as many as possible are used and the
    shortfall is recorded on the prompt.
    """
    ds = train.parent
    user_label, item_label = ds.user_ids[u], ds.item_ids[i]
    eligible = [p for p in train.positions
                if ds.reviews[p].user != u and ds.reviews[p].item != i]
    n_demo = min(policy.shots, len(eligible))
    demos = gen.sample(eligible, n_demo)

    asm = _Assembler(policy)
    asm.add(_HEADER)
    asm.add("Here are some examples of past ratings:\n")
    for n, dp in enumerate(demos, 1):
        r = ds.reviews[dp]
        du, di = ds.user_ids[r.user], ds.item_ids[r.item]
        asm.add(f"\nExample {n}:\nUser: {du}\nItem: {di}\n")
        upos = [p for p in train.user_positions(r.user) if p != dp]
        ipos = [p for p in train.item_positions(r.item) if p != dp]
        asm.add(f"Reviews written by user {du}:\n")
        asm.add_reviews(train, _most_recent(train, upos, policy.per_shot_reviews[0]), ROLE_DEMO)
        asm.add(f"Reviews written for item {di}:\n")
        asm.add_reviews(train, _most_recent(train, ipos, policy.per_shot_reviews[1]), ROLE_DEMO)
        asm.add(f"User {du} rated item {di}: {r.rating:g}\n")

    asm.add(f"\nNow the target:\nUser: {user_label}\nItem: {item_label}\n")
    _target_sections(asm, train, u, i, policy.few_shot_target_reviews, user_label, item_label)
    asm.add(_QUERY.format(user=user_label, item=item_label))
    return asm.render(u, i, shortfall=policy.shots - n_demo)


def build_revlora_input(u: int, i: int, profiles: Mapping[tuple[str, int], str],
                        train: DatasetView, policy: BudgetPolicy,
                        rating_only: bool = False) -> RenderedPrompt:
    """Profile sentences plus up to 32+32 most recent training ratings, then the query.

    With ``rating_only`` the profile sections are omitted entirely (the
    text-blind ablation arm).
    """
    ds = train.parent
    user_label, item_label = ds.user_ids[u], ds.item_ids[i]
    asm = _Assembler(policy)
    asm.add(_HEADER)
    asm.add(f"User: {user_label}\nItem: {item_label}\n")
    if not rating_only:
        s_u = profiles.get(("user", u), PROFILE_PLACEHOLDER)
        s_i = profiles.get(("item", i), PROFILE_PLACEHOLDER)
        asm.add(f"User preferences: {s_u}\n")
        asm.add(f"Item description: {s_i}\n")
    upos, ipos = _target_positions(train, u, i, policy.max_history_ratings)
    u_ratings = [f"{ds.reviews[p].rating:g}" for p in upos]
    i_ratings = [f"{ds.reviews[p].rating:g}" for p in ipos]
    asm.add("Past ratings by the user: " + (", ".join(u_ratings) or "(none)") + "\n")
    asm.add("Past ratings of the item: " + (", ".join(i_ratings) or "(none)") + "\n")
    asm.add(_QUERY.format(user=user_label, item=item_label))
    prompt = asm.render(u, i)
    included = tuple((p, ROLE_TARGET_USER) for p in upos) + tuple((p, ROLE_TARGET_ITEM) for p in ipos)
    return RenderedPrompt(prompt.text, included, prompt.token_estimate, prompt.truncated, u, i)
