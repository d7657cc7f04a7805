"""Deterministic, stream-separated randomness.

Draws are produced by hashing (seed, stream label, counter) with SHA-256, so
a run is reproducible bit-for-bit on any platform and any Python build.
Each subsystem draws from its own labelled stream: adding or removing draws
in one subsystem (say, tie-breaks) never shifts another's (say, the
per-round rating discount), which keeps regression traces stable.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction

_U64 = 1 << 64


class Stream:
    """One labelled lazy counter-based generator."""

    def __init__(self, seed: int, label: str):
        self._prefix = seed.to_bytes(8, "big", signed=False) + label.encode()
        self._counter = 0

    def u64(self) -> int:
        digest = hashlib.sha256(
            self._prefix + self._counter.to_bytes(8, "big")
        ).digest()
        self._counter += 1
        return int.from_bytes(digest[:8], "big")

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        limit = _U64 - (_U64 % n)
        while True:
            x = self.u64()
            if x < limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        if hi < lo:
            raise ValueError("empty range")
        return lo + self.below(hi - lo + 1)

    def choice(self, items):
        if not items:
            raise ValueError("choice from empty sequence")
        return items[self.below(len(items))]


class StreamFamily:
    """Factory of per-subsystem streams under one master seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & (_U64 - 1)
        self._streams: dict[str, Stream] = {}

    def stream(self, label: str) -> Stream:
        if label not in self._streams:
            self._streams[label] = Stream(self.seed, label)
        return self._streams[label]


_DYADIC = 1 << 32


def draw_discount(stream: Stream, lower: Fraction) -> Fraction:
    """Uniform dyadic rational k/2**32 strictly inside (lower, 1).

    Dyadic draws keep every downstream rating a small exact fraction.
    """
    if not Fraction(0) < lower < 1:
        raise ValueError("lower bound must sit in (0, 1)")
    lo = (lower.numerator * _DYADIC) // lower.denominator + 1
    hi = _DYADIC - 1
    if lo > hi:
        raise ValueError("interval too narrow for dyadic sampling")
    return Fraction(stream.randint(lo, hi), _DYADIC)
