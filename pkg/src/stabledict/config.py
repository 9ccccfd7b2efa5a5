"""Shared tunables and sizing helpers for the dictionary structures."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

__all__ = ["Tunables", "paper_lg", "next_pow2", "pow2_floor", "ceil_lg", "sqrt_threshold"]


@dataclass(frozen=True)
class Tunables:
    """Calibration constants, all overridable from the CLI.

    c   : bucket-count constant of the hashing-only dictionary (>= 1).
    c1  : second-filter-level gate/size constant (<= 1/3).
    c2  : expected first-level bucket load constant.
    c4  : tiles per filter level constant.
    c5  : filter cascade decay constant; analysis-only, kept so sweeps can
          record it, no structural effect.
    alpha, delta : concentration-bound parameters of the hash family.
    debug_identity : force every randomized hash component to the identity.
    """

    c: float = 8.0
    c1: float = 0.25
    c2: float = 8.0
    c4: float = 4.0
    c5: float = 2.0
    alpha: float = 0.95
    delta: float = 0.5
    debug_identity: bool = False

    def replace(self, **kw) -> "Tunables":
        cur = {f.name: getattr(self, f.name) for f in fields(self)}
        cur.update(kw)
        return Tunables(**cur)


def paper_lg(x: float) -> float:
    """log2(2 + x): positive for all x >= 0, tracks log2(x) for large x."""
    return math.log2(2 + x)


def next_pow2(v: int) -> int:
    """Smallest power of two >= v (v >= 1)."""
    if v < 1:
        raise ValueError("next_pow2 needs a positive value")
    return 1 << (v - 1).bit_length()


def pow2_floor(v: int) -> int:
    """Largest power of two <= v (v >= 1)."""
    if v < 1:
        raise ValueError("pow2_floor needs a positive value")
    return 1 << (v.bit_length() - 1)


def ceil_lg(v: int) -> int:
    return max(v - 1, 0).bit_length()


def sqrt_threshold(n: int) -> int:
    """2^ceil(lg sqrt(n)): the dispatch cutoff for 'slack about sqrt(n)'."""
    s = math.isqrt(n)
    if s * s < n:
        s += 1
    return next_pow2(max(s, 1))
