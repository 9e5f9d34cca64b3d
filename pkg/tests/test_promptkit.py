import math

from rareval.corpus import Dataset, Review
from rareval.promptkit import (PROFILE_PLACEHOLDER, ROLE_DEMO, BudgetPolicy,
                               build_few_shot, build_revlora_input, build_zero_shot,
                               default_token_estimator)
from rareval.rng import CounterRng
from rareval.views import full_view
from tests.conftest import make_dataset


def one_user_many_reviews(n, extra_users=3):
    """User 0 writes n reviews of distinct items; some filler users for demos."""
    reviews = []
    users = ["target"] + [f"u{k}" for k in range(extra_users)]
    items = [f"i{k}" for k in range(n + extra_users)]
    for pos in range(n):
        reviews.append(Review(0, pos, 4.0, f"review number {pos}", 1000 + pos, pos))
    for k in range(extra_users):
        reviews.append(Review(1 + k, n + k, 3.0, f"filler {k}", 2000 + k, n + k))
    return Dataset(reviews, users, items)


def test_token_estimator():
    assert default_token_estimator("") == 0
    assert default_token_estimator("abcd") == 1
    assert default_token_estimator("abcde") == 2


def test_zero_shot_empty_histories():
    from rareval.views import DatasetView

    ds = make_dataset(5, 2, 2, seed=1)
    # user/item known to the id tables but with no training reviews
    empty_view = DatasetView(ds, [])
    prompt = build_zero_shot(0, 0, empty_view, BudgetPolicy())
    assert prompt.text.count("(no reviews)") == 2
    assert not prompt.truncated and prompt.included == ()


def test_zero_shot_caps_at_10():
    ds = one_user_many_reviews(12)
    prompt = build_zero_shot(0, ds.item_id_of["i0"], full_view(ds), BudgetPolicy())
    user_included = [p for p, role in prompt.included if role == "target-user"]
    assert len(user_included) == 10
    # most recent by timestamp: reviews 2..11, minus the target item's own (i0 is pos 0)
    assert user_included == list(range(2, 12))


def test_zero_shot_budget_truncation():
    ds = one_user_many_reviews(20)
    big_text = "x" * 4000  # ~1000 tokens per review
    view = full_view(ds).with_overrides({p: big_text for p in range(20)})
    prompt = build_zero_shot(0, ds.item_id_of["i0"], view, BudgetPolicy())
    assert prompt.truncated
    assert prompt.token_estimate <= 7680
    assert len(prompt.included) <= 7


def test_self_exclusion():
    ds = make_dataset(100, 10, 8, seed=2)
    view = full_view(ds)
    r = ds.reviews[0]
    prompt = build_zero_shot(r.user, r.item, view, BudgetPolicy())
    for p, _ in prompt.included:
        rv = ds.reviews[p]
        assert not (rv.user == r.user and rv.item == r.item)


def test_few_shot_demo_eligibility():
    # 4 interactions, one involving the target user: demos from the other 3
    reviews = [
        Review(0, 0, 5.0, "target interaction", None, 0),
        Review(1, 1, 4.0, "a", None, 1),
        Review(2, 2, 3.0, "b", None, 2),
        Review(3, 3, 2.0, "c", None, 3),
    ]
    ds = Dataset(reviews, ["t", "a", "b", "c"], ["w", "x", "y", "z"])
    prompt = build_few_shot(CounterRng(5), 0, 0, full_view(ds), BudgetPolicy())
    assert prompt.demo_shortfall == 0
    demo_positions = {p for p, role in prompt.included if role == ROLE_DEMO}
    assert 0 not in demo_positions


def test_few_shot_deterministic():
    ds = make_dataset(80, 10, 8, seed=4)
    view = full_view(ds)
    a = build_few_shot(CounterRng(7), 0, 0, view, BudgetPolicy())
    b = build_few_shot(CounterRng(7), 0, 0, view, BudgetPolicy())
    assert a.text == b.text


def test_few_shot_three_demo_blocks():
    ds = make_dataset(80, 10, 8, seed=4)
    prompt = build_few_shot(CounterRng(9), 0, 0, full_view(ds), BudgetPolicy())
    assert prompt.text.count("Example ") == 3
    assert prompt.text.count("rated item") == 3  # each demo shows its true rating


def test_few_shot_shortfall_recorded():
    reviews = [Review(0, 0, 5.0, "only", None, 0), Review(1, 1, 4.0, "other", None, 1)]
    ds = Dataset(reviews, ["t", "a"], ["x", "y"])
    prompt = build_few_shot(CounterRng(3), 0, 0, full_view(ds), BudgetPolicy())
    assert prompt.demo_shortfall == 2  # only 1 eligible of 3 requested


def test_revlora_caps_ratings_at_32():
    ds = one_user_many_reviews(40)
    prompt = build_revlora_input(0, ds.item_id_of["i39"], {}, full_view(ds), BudgetPolicy())
    line = next(ln for ln in prompt.text.splitlines() if ln.startswith("Past ratings by the user"))
    assert line.count("4") == 32


def test_revlora_placeholders_and_rating_only():
    ds = make_dataset(30, 5, 5, seed=6)
    view = full_view(ds)
    prompt = build_revlora_input(0, 0, {}, view, BudgetPolicy())
    assert PROFILE_PLACEHOLDER in prompt.text
    plain = build_revlora_input(0, 0, {("user", 0): "Loves twang."}, view, BudgetPolicy())
    assert "Loves twang." in plain.text
    ro = build_revlora_input(0, 0, {("user", 0): "Loves twang."}, view, BudgetPolicy(),
                             rating_only=True)
    assert "preferences" not in ro.text and "Loves twang." not in ro.text
    assert "Past ratings" in ro.text


def test_determinism_all_families():
    ds = make_dataset(60, 8, 8, seed=7)
    view = full_view(ds)
    pol = BudgetPolicy()
    assert build_zero_shot(1, 1, view, pol).text == build_zero_shot(1, 1, view, pol).text
    assert (build_revlora_input(1, 1, {}, view, pol).text
            == build_revlora_input(1, 1, {}, view, pol).text)
