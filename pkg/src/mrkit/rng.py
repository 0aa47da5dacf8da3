"""xoshiro256** generator seeded through splitmix64.

Pure integer arithmetic, so a given seed yields identical streams on every
platform. Normal deviates use Box-Muller on 53-bit uniform doubles.
"""
from __future__ import annotations

import math

MASK = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK


def splitmix64(state: int):
    """Yield successive splitmix64 outputs starting from ``state``."""
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        yield z ^ (z >> 31)


class Xoshiro256:
    def __init__(self, seed: int):
        sm = splitmix64(int(seed) & MASK)
        self.s = [next(sm) for _ in range(4)]
        self._spare: float | None = None

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK, 7) * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def integers(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi)`` (Lemire-free modulo; bias < 2**-50 for small ranges)."""
        if hi <= lo:
            raise ValueError("empty range")
        return lo + self.next_u64() % (hi - lo)

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def normals(self, rows: int, cols: int, scale: float = 1.0) -> list[list[float]]:
        return [[self.normal() * scale for _ in range(cols)] for _ in range(rows)]
