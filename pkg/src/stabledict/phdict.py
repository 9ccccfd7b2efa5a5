"""Dynamic perfect hashing into [capacity + slack] without membership.

The composed structure keeps one quotient hash function splitting the
universe into `c * n^2 / (t+1)`-ish buckets, plus two membership
dictionaries: `first` stores the ids of occupied buckets (a bucket id
stands in for whichever key occupies it; the key itself is unknown), and
`second` stores, as full keys, the elements that collided with an occupied
bucket at insertion time.  First-structure codes live in [n + t/2]; second
codes are offset by n + t/2.

Since most residents are represented only by their bucket id, the structure
cannot enumerate its keys; that is what buys the lg lg(u/n) space bound,
and it also means no reseed-rebuild can reconstruct the set.  If the
collision structure ever tops out, the event is counted in
`overflow_rebuilds` and the offending insert raises; sizing keeps the
probability of that negligible, and tests pin the counter at zero.

For small slack (<= about sqrt(n)) the whole scheme is replaced by a
relabel fallback: an inner instance built with slack n, whose codes in [2n]
are mapped through an explicit table onto a minimal external range.

Deletions follow the reverse of insertion: the collision structure is
consulted first, and only then is the bucket id removed.  Deleting a
non-resident key is undefined; it is reported only when both lookups miss.

Single writer per instance; reads may run concurrently between mutations.
"""

from __future__ import annotations

import math

from .basedict import CodeAllocator
from .config import Tunables, ceil_lg, next_pow2, paper_lg, sqrt_threshold
from .membdict import MembPhDict, MembPhParams, _merge, _merge_words
from .qhf import QhfParams, sample_qhf
from .rng import SplitMix64
from .spacemeter import SpaceLedger, pack_bits

__all__ = ["PhOnlyParams", "PhOnlyDict"]


class PhOnlyParams:
    """Validated sizing for a hashing-only dictionary."""

    def __init__(self, capacity: int, slack: int, universe: int,
                 tunables: Tunables = Tunables()):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if slack < 0:
            raise ValueError("slack must be nonnegative")
        if universe < capacity or universe & (universe - 1):
            raise ValueError("universe must be a power of two >= capacity")
        if tunables.c < 1:
            raise ValueError("c must be at least 1")
        self.capacity = capacity
        self.slack = slack
        self.universe = universe
        self.tunables = tunables
        # Sizing uses a reduced slack of about n / lg(u/n): larger slack
        # cannot reduce space further, and an unreduced slack of order n
        # would make the collision structure needlessly large.
        self.slack_sized = min(slack, math.ceil(
            capacity / paper_lg(universe / capacity)))

    @property
    def code_range(self) -> int:
        return self.capacity + self.slack

    def relabel_fallback(self) -> bool:
        return self.slack <= sqrt_threshold(self.capacity) and self.capacity >= 4


class PhOnlyDict:
    """Stable perfect hashing only; membership is not supported."""

    def __init__(self, params: PhOnlyParams, rng: SplitMix64):
        self.params = params
        self._rng = rng.spawn()
        self.live_count = 0
        self.overflow_rebuilds = 0
        self.second_inserts = 0   # keys ever routed to the collision path
        n, t, u, tn = params.capacity, params.slack, params.universe, params.tunables
        self.mode = "relabel" if params.relabel_fallback() else "composed"
        if self.mode == "relabel":
            inner_params = PhOnlyParams(n, n, u, tn)
            self.inner = PhOnlyDict(inner_params, self._rng)
            self.relabel = [None] * (2 * n)
            self.relabel_alloc = CodeAllocator(n + t)
            return

        ts = params.slack_sized
        self.buckets = min(next_pow2(math.ceil(tn.c * n * n / (ts + 1))), u)
        self.qhf = sample_qhf(
            QhfParams(u, self.buckets, n, alpha=tn.alpha, delta=tn.delta,
                      debug_identity=tn.debug_identity), self._rng)
        self.first = MembPhDict(
            MembPhParams(n, ts // 2, self.buckets, tn), self._rng)
        cap2 = max(1, -(-ts // 4))
        slack2 = max(0, min(cap2, -(-t // 2) - cap2))
        self.second = MembPhDict(MembPhParams(cap2, slack2, u, tn), self._rng)
        self.second_offset = n + t // 2

    # -- operations ---------------------------------------------------------

    def insert(self, key: int) -> int:
        """Insert a key not currently resident; returns its stable hashcode."""
        if not 0 <= key < self.params.universe:
            raise ValueError("key outside universe")
        if self.live_count >= self.params.capacity:
            raise ValueError("capacity exceeded")
        if self.mode == "relabel":
            inner_code = self.inner.insert(key)
            if self.relabel[inner_code] is None:
                self.relabel[inner_code] = self.relabel_alloc.alloc()
            self.live_count += 1
            return self.relabel[inner_code]
        bucket = self.qhf.eval(key)[0]
        if not self.first.member(bucket):
            code = self.first.insert(bucket)
            self.live_count += 1
            return code
        if self.second.member(key):
            raise KeyError(f"key {key} already resident")
        self.second_inserts += 1
        if self.second.live_count >= self.second.params.capacity:
            self.overflow_rebuilds += 1
            raise RuntimeError(
                "collision structure full; a rebuild would need the key set, "
                "which this structure deliberately does not retain")
        code = self.second.insert(key)
        self.live_count += 1
        return self.second_offset + code

    def delete(self, key: int) -> None:
        """Delete a resident key (checked only as far as detectable)."""
        if not 0 <= key < self.params.universe:
            raise ValueError("key outside universe")
        if self.mode == "relabel":
            inner_code = self.inner.hashcode(key)
            self.inner.delete(key)
            ext = self.relabel[inner_code]
            self.relabel[inner_code] = None
            self.relabel_alloc.free_code(ext)
            self.live_count -= 1
            return
        # Reverse of insertion order: the collision structure first.
        if self.second.member(key):
            self.second.delete(key)
            self.live_count -= 1
            return
        bucket = self.qhf.eval(key)[0]
        if self.first.member(bucket):
            self.first.delete(bucket)
            self.live_count -= 1
            return
        raise KeyError(f"key {key} not represented (delete of a non-resident?)")

    def hashcode(self, key: int) -> int:
        """Stable code of a resident key.

        For a non-resident key the result is meaningless but always lies in
        [capacity + slack] and the query never mutates the structure.
        """
        if not 0 <= key < self.params.universe:
            raise ValueError("key outside universe")
        if self.mode == "relabel":
            try:
                inner_code = self.inner.hashcode(key)
            except KeyError:
                return 0
            ext = self.relabel[inner_code]
            return ext if ext is not None else 0
        if self.second.member(key):
            return self.second_offset + self.second.hashcode(key)
        bucket = self.qhf.eval(key)[0]
        if self.first.member(bucket):
            return self.first.hashcode(bucket)
        return 0

    # -- measurement ----------------------------------------------------------

    def space_ledger(self) -> SpaceLedger:
        led = SpaceLedger()
        led.add("params", 4 * 64)
        led.add("counters", 3 * 64)
        if self.mode == "relabel":
            _merge(led, "inner", self.inner.space_ledger())
            width = max(1, ceil_lg(self.params.code_range))
            led.add("relabel.table", len(self.relabel) * (1 + width))
            _merge(led, "relabel.allocator", self.relabel_alloc.space_ledger())
            return led
        _merge(led, "qhf", self.qhf.describe_space())
        _merge(led, "first", self.first.space_ledger())
        _merge(led, "second", self.second.space_ledger())
        return led

    def space_bits(self) -> int:
        return self.space_ledger().total

    def serialize_components(self) -> dict[str, list[int]]:
        p = self.params
        out = {
            "params": pack_bits([(p.capacity, 64), (p.slack, 64), (p.universe, 64), (1, 64)]),
            "counters": pack_bits([(self.live_count, 64), (self.overflow_rebuilds, 64),
                                   (self.second_inserts, 64)]),
        }
        if self.mode == "relabel":
            _merge_words(out, "inner", self.inner.serialize_components())
            width = max(1, ceil_lg(p.code_range))
            fields = []
            for ext in self.relabel:
                fields.append((1 if ext is not None else 0, 1))
                fields.append((ext or 0, width))
            out["relabel.table"] = pack_bits(fields)
            _merge_words(out, "relabel.allocator", self.relabel_alloc.serialize_components())
            return out
        _merge_words(out, "qhf", self.qhf.serialize_components())
        _merge_words(out, "first", self.first.serialize_components())
        _merge_words(out, "second", self.second.serialize_components())
        return out
