"""Small invertible randomized maps: the building blocks of quotient hashing.

Three primitives live here:

* :class:`AffinePerm` -- x -> a*x + b over GF(2^k) with a != 0, the classic
  2-independent permutation family on a power-of-two domain.
* :class:`ShiftFamily` -- a keyed mixing function assigning each row a
  circular shift amount.  It stands in for a highly independent hash family; its
  uniformity is a tested statistical claim, not a proven one.
* :class:`StoredPerm` -- an explicit uniformly random permutation held as
  forward/inverse tables, sampled by Fisher-Yates.

All three are immutable after sampling and safe to evaluate concurrently;
sampling itself requires an exclusively owned generator.
"""

from __future__ import annotations

from .gf2 import MODULUS, gf_inv, mul_byte_tables, mul_with_tables
from .rng import SplitMix64, mix64

__all__ = [
    "AffinePerm",
    "ShiftFamily",
    "StoredPerm",
    "sample_affine",
    "sample_stored",
]


class AffinePerm:
    """Bijection x -> a*x + b on [2^k], arithmetic in GF(2^k), a != 0."""

    __slots__ = ("k", "a", "b", "_fwd_tables", "_a_inv", "_inv_tables")

    def __init__(self, k: int, a: int, b: int):
        if not 1 <= k <= 64:
            raise ValueError("width must be in [1, 64]")
        if a == 0:
            raise ValueError("multiplier must be nonzero")
        if a >> k or b >> k:
            raise ValueError("coefficients out of field")
        self.k = k
        self.a = a
        self.b = b
        self._fwd_tables = None
        self._a_inv = None
        self._inv_tables = None

    @property
    def modulus(self) -> int:
        return MODULUS[self.k]

    def apply(self, x: int) -> int:
        assert 0 <= x < (1 << self.k), "input outside domain"
        if self._fwd_tables is None:
            self._fwd_tables = mul_byte_tables(self.a, self.k)
        return mul_with_tables(self._fwd_tables, x) ^ self.b

    def invert(self, y: int) -> int:
        assert 0 <= y < (1 << self.k), "input outside domain"
        if self._inv_tables is None:
            self._a_inv = gf_inv(self.a, self.k)
            self._inv_tables = mul_byte_tables(self._a_inv, self.k)
        return mul_with_tables(self._inv_tables, y ^ self.b)

    def space_bits(self) -> int:
        # Two stored field elements; the modulus is a program constant.
        return 2 * self.k


def sample_affine(k: int, rng: SplitMix64) -> AffinePerm:
    """Uniform AffinePerm on [2^k].

    Consumes one random word per attempt for the multiplier (rejecting 0,
    so expected 2^k/(2^k - 1) words) plus one word for the offset.
    """
    a = 0
    while a == 0:
        a = rng.getrandbits(k)
    b = rng.getrandbits(k)
    return AffinePerm(k, a, b)


class ShiftFamily:
    """Deterministic keyed map from row indices to shifts in [columns].

    The 128-bit seed keys two mixing rounds; the output distribution over
    seeds is indistinguishable from uniform for the purposes of this
    package (chi-square tested, not proven).
    """

    __slots__ = ("seed_lo", "seed_hi", "columns", "row_bits")

    def __init__(self, seed: int, columns: int, row_bits: int):
        if columns & (columns - 1) or columns <= 0:
            raise ValueError("columns must be a power of two")
        self.seed_lo = seed & ((1 << 64) - 1)
        self.seed_hi = (seed >> 64) & ((1 << 64) - 1)
        self.columns = columns
        self.row_bits = row_bits

    def shift_of_row(self, row: int) -> int:
        assert 0 <= row < (1 << self.row_bits) or self.row_bits == 0
        h = mix64(row ^ self.seed_lo)
        h = mix64((h + self.seed_hi) & ((1 << 64) - 1))
        if self.columns == 1:
            return 0
        return h >> (64 - self.columns.bit_length() + 1)

    def space_bits(self) -> int:
        return 128


class StoredPerm:
    """Explicit permutation of [size] with forward and inverse tables."""

    __slots__ = ("size", "forward", "inverse")

    def __init__(self, forward: list[int]):
        self.size = len(forward)
        self.forward = forward
        inv = [0] * self.size
        for i, j in enumerate(forward):
            inv[j] = i
        self.inverse = inv

    def apply(self, i: int) -> int:
        return self.forward[i]

    def invert(self, j: int) -> int:
        return self.inverse[j]

    def space_bits(self) -> int:
        entry = max(self.size - 1, 0).bit_length()
        return 2 * self.size * entry

    @classmethod
    def identity(cls, size: int) -> "StoredPerm":
        return cls(list(range(size)))


def sample_stored(size: int, rng: SplitMix64) -> StoredPerm:
    """Uniform permutation of [size] via Fisher-Yates (see rng.shuffle)."""
    if size & (size - 1) or size <= 0:
        raise ValueError("size must be a power of two")
    forward = list(range(size))
    rng.shuffle(forward)
    return StoredPerm(forward)
