"""Portable seedable random number generation for graph synthesis.

The generators in :mod:`mgksolver.generators` must produce identical graphs
for identical seeds on every platform and in every implementation language,
so we pin a concrete 64-bit generator (SplitMix64) and concrete sampling
procedures instead of relying on a runtime library whose streams may change.

SplitMix64 recurrence (all arithmetic mod 2**64)::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

Derived samplers:

* ``random()``   -- take the top 53 bits of the next output: ``out >> 11``,
  scaled by 2**-53, giving a uniform float in [0, 1).
* ``randint(n)`` -- rejection sampling: draw 64-bit outputs until one falls
  below ``2**64 - (2**64 % n)``, then reduce mod ``n`` (unbiased).
* ``shuffle(xs)`` -- Fisher-Yates from the back, ``j = randint(i + 1)``.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """Deterministic 64-bit generator with documented sampling procedures."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint(self, n: int) -> int:
        """Unbiased uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % n

    def shuffle(self, xs: list) -> None:
        """In-place Fisher-Yates shuffle, iterating from the last element."""
        for i in range(len(xs) - 1, 0, -1):
            j = self.randint(i + 1)
            xs[i], xs[j] = xs[j], xs[i]
