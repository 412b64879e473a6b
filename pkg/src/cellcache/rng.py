"""Deterministic random streams shared by both simulation engines.

The simulator keeps one independent splitmix64 stream per purpose
(content draws, location draws, serving choice, miss retrieval choice,
and one per base station) so that changing what one cache does never
perturbs the draws seen by another.  The compiled engine implements the
same integer recipe, which is what makes pure/compiled traces and
paired policy comparisons bit-identical.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)

# fixed stream slots; per-station streams start at STREAM_BS
STREAM_CONTENT = 0
STREAM_LOCATION = 1
STREAM_SERVING = 2
STREAM_RETRIEVAL = 3
STREAM_CHANNEL = 4
STREAM_BS = 5


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, stream_id: int) -> int:
    """Initial splitmix64 state for stream `stream_id` of a master seed."""
    return mix64((master_seed + (stream_id + 1) * GOLDEN) & MASK64)


class SplitMix64:
    """Tiny counter-style PRNG; one instance per stream."""

    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def next_double(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def bernoulli(self, p: float) -> bool:
        """Draw a biased coin; degenerate probabilities consume no draw.

        Skipping the draw at p >= 1 (and p <= 0) is load-bearing: it is
        what keeps e.g. qLRU at q=1 on exactly the same stream positions
        as plain LRU, so their traces can be compared byte for byte.
        """
        if p >= 1.0:
            return True
        if p <= 0.0:
            return False
        return self.next_double() < p

    def choice_index(self, n: int) -> int:
        """Uniform index in [0, n); a singleton consumes no draw."""
        if n <= 1:
            return 0
        i = int(self.next_double() * n)
        return n - 1 if i >= n else i


def make_streams(master_seed: int, n_stations: int) -> list[SplitMix64]:
    return [SplitMix64(stream_seed(master_seed, k)) for k in range(STREAM_BS + n_stations)]
