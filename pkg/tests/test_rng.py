from collections import Counter

from hypothesis import given, strategies as st

from rareval.rng import MASK64, CounterRng, derive_seed, mix64


def test_mix64_is_stable():
    # frozen reference outputs; any change here breaks manifest replay
    assert mix64(0) == 0
    assert mix64(1) == 6238072747940578789
    # splitmix64 known-answer: first output for seed 0 is 0xE220A8397B1DCDAF
    assert mix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF
    assert CounterRng(0).next_u64() == 0  # counter 0 mixes the bare seed


def test_stream_is_a_function_of_seed():
    a = CounterRng(123)
    b = CounterRng(123)
    assert [a.next_u64() for _ in range(20)] == [b.next_u64() for _ in range(20)]
    c = CounterRng(124)
    assert [CounterRng(123).next_u64() for _ in range(5)] != [c.next_u64() for _ in range(5)]


@given(st.integers(min_value=0, max_value=MASK64), st.integers(min_value=1, max_value=10_000))
def test_below_in_range(seed, bound):
    rng = CounterRng(seed)
    for _ in range(20):
        assert 0 <= rng.below(bound) < bound


@given(st.integers(min_value=0, max_value=MASK64), st.integers(min_value=0, max_value=50))
def test_shuffle_is_a_permutation(seed, n):
    items = list(range(n))
    shuffled = list(items)
    CounterRng(seed).shuffle(shuffled)
    assert sorted(shuffled) == items


def test_sample_without_replacement():
    rng = CounterRng(9)
    picked = rng.sample(list(range(100)), 10)
    assert len(picked) == len(set(picked)) == 10
    assert all(0 <= x < 100 for x in picked)


def test_below_roughly_uniform():
    rng = CounterRng(5)
    counts = Counter(rng.below(4) for _ in range(40_000))
    for v in range(4):
        assert abs(counts[v] / 40_000 - 0.25) < 0.02


def test_derive_seed_separates_labels():
    s = 42
    assert derive_seed(s, "split") != derive_seed(s, "perturb-select-remove")
    assert derive_seed(s, "split") == derive_seed(s, "split")
