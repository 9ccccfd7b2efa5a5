"""Deterministic random number generation.

Every randomized component in this package draws from :class:`SplitMix64`
rather than the stdlib generator, so that sampled structures and test
vectors are reproducible across Python versions.  The generator and the
shuffle below are pinned by construction: both are fully specified here
and covered by frozen regression vectors in the test suite.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

# Additive constant and mixing multipliers of the splitmix64 step function.
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """One stateless splitmix64 finalization round of a 64-bit value."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(root: int, index: int) -> int:
    """Derive the seed of stream `index` from a 64-bit root seed.

    Documented split rule: seed_i = mix64(root + (index + 1) * GAMMA mod 2^64).
    Distinct indices give independent-looking streams for the same root.
    """
    return mix64((root + ((index + 1) * _GAMMA)) & MASK64)


class SplitMix64:
    """Sequential splitmix64 generator with integer convenience methods."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return mix64(self._state)

    def getrandbits(self, k: int) -> int:
        """Uniform k-bit value, 0 <= k <= 64."""
        if k == 0:
            return 0
        return self.next_u64() >> (64 - k)

    def randrange(self, n: int) -> int:
        """Uniform value in [0, n) by rejection; n must fit in 64 bits."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        if n & (n - 1) == 0:
            return self.next_u64() & (n - 1)
        # Reject into the largest multiple of n below 2^64.
        limit = MASK64 - (MASK64 % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates: for i = len-1 .. 1, swap i with randrange(i+1)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def spawn(self) -> "SplitMix64":
        """A fresh generator seeded from this one's stream."""
        return SplitMix64(self.next_u64())
