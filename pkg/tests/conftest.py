import random

import pytest

from rareval.corpus import Dataset, Review

WORDS = ["great", "solid", "poor", "broke", "love", "cheap", "tone", "fast",
         "sturdy", "noisy", "bright", "warm", "muddy", "crisp", "value"]


def make_dataset(n_reviews, n_users, n_items, seed=0, with_timestamps=True,
                 text_words=6) -> Dataset:
    """Synthetic corpus with reproducible ids, ratings, and texts."""
    rng = random.Random(seed)
    reviews = []
    user_ids = [f"U{n:05d}" for n in range(n_users)]
    item_ids = [f"I{n:05d}" for n in range(n_items)]
    seen_u, seen_i = [], []
    interned_u, interned_i = {}, {}
    for pos in range(n_reviews):
        us = user_ids[rng.randrange(n_users)]
        its = item_ids[rng.randrange(n_items)]
        if us not in interned_u:
            interned_u[us] = len(seen_u)
            seen_u.append(us)
        if its not in interned_i:
            interned_i[its] = len(seen_i)
            seen_i.append(its)
        text = " ".join(rng.choice(WORDS) for _ in range(text_words)) + f" #{pos}"
        ts = 1_300_000_000 + rng.randrange(100_000_000) if with_timestamps else None
        reviews.append(Review(interned_u[us], interned_i[its],
                              float(rng.randint(1, 5)), text, ts, pos))
    return Dataset(reviews, seen_u, seen_i)


@pytest.fixture
def small_dataset():
    # 3 records, 2 users, 2 items: the hand-checkable fixture
    reviews = [
        Review(0, 0, 5.0, "loved it", 100, 0),
        Review(1, 0, 3.0, "it was fine", 200, 1),
        Review(0, 1, 4.0, "pretty good", 300, 2),
    ]
    return Dataset(reviews, ["alice", "bob"], ["guitar", "drum"])


@pytest.fixture
def medium_dataset():
    return make_dataset(400, 40, 30, seed=7)
