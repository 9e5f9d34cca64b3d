"""Counter-based pseudo-random generator shared by every seeded operation.

All shuffles, selections, and initializations in this package draw from the
same generator so that a run is reproducible from its seed alone, and so a
reimplementation in another language can match output bit-for-bit.

The generator is SplitMix64 used in counter mode: the n-th output is
``mix64(seed + n * GOLDEN)`` where ``mix64`` is the SplitMix64 finalizer and
GOLDEN is 2^64 / phi. Bounded draws use the Lemire multiply-shift reduction
``(next_u64() * n) >> 64``, which is biased by at most n / 2^64 and needs no
rejection loop. Shuffling is the classic backward Fisher-Yates.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a 64-bit bijective mixing function."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, label: str) -> int:
    """Deterministically derive an independent stream seed from a label.

    Used to give each pipeline stage (split, removal selection, shuffle, ...)
    its own stream off one experiment-level seed.
    """
    h = mix64(seed & MASK64)
    for byte in label.encode("utf-8"):
        h = mix64(h ^ byte)
    return h


class CounterRng:
    """SplitMix64 in counter mode; the whole stream is a function of the seed."""

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.counter = 0

    def next_u64(self) -> int:
        out = mix64((self.seed + self.counter * GOLDEN) & MASK64)
        self.counter += 1
        return out

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via multiply-shift reduction."""
        if n <= 0:
            raise ValueError("bound must be positive")
        return (self.next_u64() * n) >> 64

    def shuffle(self, items: list) -> None:
        """In-place backward Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: list, k: int) -> list:
        """First k elements of a partial Fisher-Yates pass (without replacement)."""
        if k > len(items):
            raise ValueError("sample larger than population")
        pool = list(items)
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
