"""Seedable PRNG pinned for replayable telemetry.

SplitMix64 drives every stochastic artifact (scenario noise, synthetic
datasets, the hashing embedder's bucket function). The exact algorithms are
documented in docs/protocol.md so an independent implementation can replay a
stream bit-for-bit.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes | str) -> int:
    """64-bit FNV-1a hash."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK
    return h


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream; `derive` spawns independent named substreams."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        return _mix(self.state)

    def next_unit(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def next_gauss(self) -> float:
        """Standard normal via Box-Muller; consumes exactly two u64 draws."""
        u1 = 1.0 - self.next_unit()  # (0, 1], keeps log finite
        u2 = self.next_unit()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def next_below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection on the top 2**64 % bound."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive(seed: int, *names: str) -> SplitMix64:
    """Deterministic substream keyed by seed and a name path."""
    key = "\x1f".join(names)
    return SplitMix64(_mix((seed + fnv1a64(key)) & _MASK))
