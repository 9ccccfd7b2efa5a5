"""Retrieval of fixed-width payloads via stable hashcodes.

A thin composition: any engine assigning stable codes in [capacity + slack]
(membership-backed or hashing-only) plus a bit-packed payload array indexed
by code.  Because codes are stable, a key's payload cell never moves while
the key is resident; deletion leaves the cell's bits behind as garbage for
the next occupant to overwrite.

With a hashing-only engine, retrieve/update on a non-resident key return or
overwrite arbitrary bits (the documented undefined outcome); a
membership-backed engine rejects such calls instead.
"""

from __future__ import annotations

from array import array

from .membdict import MembPhDict
from .spacemeter import SpaceLedger, pack_bits

__all__ = ["PayloadStore", "RetrievalDict"]


class PayloadStore:
    """slots * payload_bits packed cells; payload_bits <= 64."""

    __slots__ = ("slots", "payload_bits", "_words")

    def __init__(self, slots: int, payload_bits: int):
        if not 0 <= payload_bits <= 64:
            raise ValueError("payload width must be in [0, 64]")
        if slots < 0:
            raise ValueError("slot count must be nonnegative")
        self.slots = slots
        self.payload_bits = payload_bits
        nwords = -(-slots * payload_bits // 64)
        self._words = array("Q", bytes(8 * nwords))

    def write(self, slot: int, value: int) -> None:
        r = self.payload_bits
        if value >> r:
            raise ValueError("payload wider than declared")
        if not 0 <= slot < self.slots:
            raise IndexError("slot out of range")
        if r == 0:
            return
        pos = slot * r
        w, off = divmod(pos, 64)
        mask = (1 << r) - 1
        self._words[w] = (self._words[w] & ~((mask << off) & 0xFFFFFFFFFFFFFFFF)
                          | (value << off)) & 0xFFFFFFFFFFFFFFFF
        spill = off + r - 64
        if spill > 0:
            hi = value >> (r - spill)
            himask = (1 << spill) - 1
            self._words[w + 1] = (self._words[w + 1] & ~himask) | hi

    def read(self, slot: int) -> int:
        r = self.payload_bits
        if not 0 <= slot < self.slots:
            raise IndexError("slot out of range")
        if r == 0:
            return 0
        pos = slot * r
        w, off = divmod(pos, 64)
        val = self._words[w] >> off
        spill = off + r - 64
        if spill > 0:
            val |= (self._words[w + 1] & ((1 << spill) - 1)) << (r - spill)
        return val & ((1 << r) - 1)

    def space_bits(self) -> int:
        return self.slots * self.payload_bits


class RetrievalDict:
    """Keys -> payload_bits of data, addressed through a code-assigning engine."""

    def __init__(self, engine, payload_bits: int):
        self.engine = engine
        self.store = PayloadStore(engine.params.code_range, payload_bits)
        self.checks_membership = isinstance(engine, MembPhDict)

    @property
    def payload_bits(self) -> int:
        return self.store.payload_bits

    def insert(self, key: int, payload: int) -> int:
        """Insert key with its payload; returns the assigned hashcode."""
        code = self.engine.insert(key)
        self.store.write(code, payload)
        return code

    def retrieve(self, key: int) -> int:
        """Payload of a resident key; undefined bits for non-residents on a
        hashing-only engine, KeyError on a membership-backed one."""
        return self.store.read(self._code_checked(key))

    def update(self, key: int, payload: int) -> None:
        """Overwrite the payload in place; the key's slot does not move."""
        self.store.write(self._code_checked(key), payload)

    def delete(self, key: int) -> None:
        # Payload cells are not cleared: only resident keys may be read,
        # so stale bits are unobservable through this interface.
        self.engine.delete(key)

    def _code_checked(self, key: int) -> int:
        if self.checks_membership and not self.engine.member(key):
            raise KeyError(f"key {key} not resident")
        return self.engine.hashcode(key)

    def space_ledger(self) -> SpaceLedger:
        led = SpaceLedger()
        for name, bits in self.engine.space_ledger().entries.items():
            led.add(f"engine.{name}", bits)
        led.add("payloads", self.store.space_bits())
        return led

    def space_bits(self) -> int:
        return self.space_ledger().total

    def serialize_components(self) -> dict[str, list[int]]:
        out = {}
        for name, words in self.engine.serialize_components().items():
            out[f"engine.{name}"] = words
        r = self.store.payload_bits
        out["payloads"] = pack_bits(
            [(self.store.read(s), r) for s in range(self.store.slots)])
        return out
