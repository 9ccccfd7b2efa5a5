"""Bit-exact space accounting.

:class:`SpaceLedger` is the primary measurement: named components mapped to
exact bit counts.  :class:`ArenaModel` is the secondary memory model, an
infinite array of 64-bit cells whose usage is the shortest prefix holding
all nonblank cells; it is consulted only by accounting-honesty tests that
serialize a structure's components into the arena and compare against the
ledger.  The blank sentinel is the all-zero word, so serializers must not
place a semantically meaningful all-zero word at the top of their layout
(serialization in this package always ends with a nonzero length header).
"""

from __future__ import annotations

WORD_BITS = 64


class SpaceLedger:
    """Named component -> bit count, with a consistent running total."""

    __slots__ = ("entries", "total")

    def __init__(self):
        self.entries: dict[str, int] = {}
        self.total = 0

    def add(self, component: str, bits: int) -> None:
        if bits < 0:
            raise ValueError("bit counts are nonnegative")
        self.entries[component] = self.entries.get(component, 0) + bits
        self.total += bits

    def sub(self, component: str, bits: int) -> None:
        if bits < 0:
            raise ValueError("bit counts are nonnegative")
        have = self.entries.get(component, 0)
        if bits > have:
            raise ValueError(f"underflow on component {component!r}")
        self.entries[component] = have - bits
        self.total -= bits

    def get(self, component: str) -> int:
        return self.entries.get(component, 0)


class ArenaModel:
    """Sparse model of an infinite word array; space = shortest nonblank prefix."""

    BLANK = 0

    __slots__ = ("_cells", "_high", "_dirty")

    def __init__(self):
        self._cells: dict[int, int] = {}
        self._high = 0      # 1 + max nonblank address, 0 if none
        self._dirty = False

    def write(self, addr: int, word: int) -> None:
        if addr < 0:
            raise ValueError("addresses are nonnegative")
        if word == self.BLANK:
            self.blank(addr)
            return
        self._cells[addr] = word
        if addr + 1 > self._high:
            self._high = addr + 1

    def read(self, addr: int) -> int:
        return self._cells.get(addr, self.BLANK)

    def blank(self, addr: int) -> None:
        if self._cells.pop(addr, None) is not None and addr + 1 == self._high:
            self._dirty = True   # high-water mark may drop; recompute lazily

    def space_words(self) -> int:
        if self._dirty:
            self._high = 1 + max(self._cells) if self._cells else 0
            self._dirty = False
        return self._high


def pack_bits(fields: list[tuple[int, int]]) -> list[int]:
    """Pack (value, width) fields little-endian into 64-bit words.

    The flat serialized layout used by accounting-honesty checks: a
    component of total width W occupies exactly ceil(W / 64) words.
    """
    words = []
    acc = 0
    fill = 0
    for value, width in fields:
        if width < 0 or (width < 64 and value >> width):
            raise ValueError("field does not fit its declared width")
        acc |= (value & ((1 << width) - 1) if width else 0) << fill
        fill += width
        while fill >= WORD_BITS:
            words.append(acc & ((1 << WORD_BITS) - 1))
            acc >>= WORD_BITS
            fill -= WORD_BITS
    if fill:
        words.append(acc)
    return words
