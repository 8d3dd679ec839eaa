"""Portable pseudo-random streams.

Episodes draw from a xoshiro256** generator whose 256-bit state is expanded
from a single 64-bit word with SplitMix64. The per-episode stream is seeded
with ``seed ^ episode_index``, so traces can be reproduced by any
implementation of the same two generators.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; return ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** generator with a ``random()``/``randbelow()`` surface."""

    __slots__ = ("_s",)

    def __init__(self, state: tuple[int, int, int, int]):
        if len(state) != 4 or not any(state):
            raise ValueError("xoshiro256 state must be four words, not all zero")
        self._s = [w & MASK64 for w in state]

    @classmethod
    def from_seed(cls, seed: int) -> "Xoshiro256":
        words = []
        sm = seed & MASK64
        for _ in range(4):
            sm, out = splitmix64(sm)
            words.append(out)
        return cls(tuple(words))

    @classmethod
    def for_episode(cls, seed: int, episode_index: int) -> "Xoshiro256":
        return cls.from_seed((seed ^ episode_index) & MASK64)

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = MASK64 - (MASK64 + 1) % n
        while True:
            x = self.next_u64()
            if x <= limit:
                return x % n

    def getstate(self) -> tuple[int, int, int, int]:
        return tuple(self._s)
