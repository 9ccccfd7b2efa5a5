"""Dynamic exact-membership map from fixed-width keys to fixed-width values.

The workhorse dictionary behind every level of the larger structures:
two tables of four-slot buckets addressed by independent keyed hashes,
displacement on insertion (a bounded breadth-first search for an eviction
path, applied only when one is found), and a small stash for the rare
leftovers.  Lookups touch at most ``MAX_LOOKUP_PROBES`` slots, worst case.

Two failure policies exist for a stash overflow: ``rebuild`` reseeds the
hashes and re-places everything (values travel with their keys, so stored
associations survive rebuilds unchanged), while ``no_rebuild`` reports the
failed insert upward and leaves the structure untouched, for callers that
prefer to route the key elsewhere.

Capacity is fixed at construction; space is preallocated and constant.
Single writer per instance; reads may be concurrent between mutations.
"""

from __future__ import annotations

from .rng import SplitMix64, mix64
from .spacemeter import SpaceLedger, pack_bits

__all__ = ["BaseDict", "CodeAllocator"]

SLOTS_PER_BUCKET = 4
STASH_SIZE = 8
# Tables hold ceil(5/4 * capacity) slots in total: load factor <= 0.8.
NUM, DEN = 5, 4
_BFS_NODE_BUDGET = 64

MAX_LOOKUP_PROBES = 2 * SLOTS_PER_BUCKET + STASH_SIZE


class BaseDict:
    """Bucketized two-choice displacement table with a stash.

    Exact layout, in bits (the documented space formula):

        buckets_per_table B = max(1, ceil(capacity * 5/4 / 8))
        tables  = 2 * B * 4 * (key_bits + value_bits + 1)
        stash   = 8 * (key_bits + value_bits + 1)
        seeds   = 2 * 64
        counters = 2 * 64   (occupancy, rebuild_count)
    """

    def __init__(self, key_bits: int, value_bits: int, capacity: int,
                 rng: SplitMix64, policy: str = "rebuild"):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if not 0 <= key_bits <= 64 or not 0 <= value_bits <= 64:
            raise ValueError("field widths must be in [0, 64]")
        if policy not in ("rebuild", "no_rebuild"):
            raise ValueError("policy must be 'rebuild' or 'no_rebuild'")
        self.key_bits = key_bits
        self.value_bits = value_bits
        self.capacity = capacity
        self.policy = policy
        self._rng = rng.spawn()
        self.buckets_per_table = max(1, -(-capacity * NUM // (DEN * 2 * SLOTS_PER_BUCKET)))
        size = self.buckets_per_table * SLOTS_PER_BUCKET
        # keys[t][slot] is None when empty; values ride along by index.
        self._keys = [[None] * size, [None] * size]
        self._vals = [[0] * size, [0] * size]
        self._stash: list[list[int]] = []
        self._seeds = [self._rng.next_u64(), self._rng.next_u64()]
        self.occupancy = 0
        self.rebuild_count = 0

    # -- hashing ----------------------------------------------------------

    def _bucket(self, table: int, key: int) -> int:
        h = mix64(key ^ self._seeds[table])
        return (h * self.buckets_per_table) >> 64

    # -- queries ----------------------------------------------------------

    def lookup(self, key: int):
        """Value stored under `key`, or None when absent."""
        for t in (0, 1):
            base = self._bucket(t, key) * SLOTS_PER_BUCKET
            keys = self._keys[t]
            for s in range(base, base + SLOTS_PER_BUCKET):
                if keys[s] == key:
                    return self._vals[t][s]
        for k, v in self._stash:
            if k == key:
                return v
        return None

    def __contains__(self, key: int) -> bool:
        return self.lookup(key) is not None

    def items(self):
        """All live (key, value) pairs, in storage order."""
        for t in (0, 1):
            keys, vals = self._keys[t], self._vals[t]
            for s, k in enumerate(keys):
                if k is not None:
                    yield k, vals[s]
        for k, v in self._stash:
            yield k, v

    # -- updates ----------------------------------------------------------

    def insert(self, key: int, value: int) -> str:
        """Store key -> value.

        Returns 'inserted', 'replaced', 'rebuilt' (rebuild policy only), or
        'failed' (no_rebuild policy only; the structure is unchanged).
        """
        assert key >> self.key_bits == 0, "key wider than declared"
        assert value >> self.value_bits == 0, "value wider than declared"
        for t in (0, 1):
            base = self._bucket(t, key) * SLOTS_PER_BUCKET
            keys = self._keys[t]
            for s in range(base, base + SLOTS_PER_BUCKET):
                if keys[s] == key:
                    self._vals[t][s] = value
                    return "replaced"
        for ent in self._stash:
            if ent[0] == key:
                ent[1] = value
                return "replaced"
        if self.occupancy >= self.capacity:
            raise ValueError("capacity exceeded")
        if self._place(key, value):
            self.occupancy += 1
            return "inserted"
        if len(self._stash) < STASH_SIZE:
            self._stash.append([key, value])
            self.occupancy += 1
            return "inserted"
        if self.policy == "no_rebuild":
            return "failed"
        self._rebuild(pending=(key, value))
        self.occupancy += 1
        return "rebuilt"

    def delete(self, key: int) -> str:
        """Remove `key`; returns 'deleted' or 'absent'."""
        for t in (0, 1):
            base = self._bucket(t, key) * SLOTS_PER_BUCKET
            keys = self._keys[t]
            for s in range(base, base + SLOTS_PER_BUCKET):
                if keys[s] == key:
                    keys[s] = None
                    self._vals[t][s] = 0
                    self.occupancy -= 1
                    return "deleted"
        for i, (k, _) in enumerate(self._stash):
            if k == key:
                self._stash[i] = self._stash[-1]
                self._stash.pop()
                self.occupancy -= 1
                return "deleted"
        return "absent"

    # -- placement ----------------------------------------------------------

    def _try_direct(self, key: int, value: int) -> bool:
        for t in (0, 1):
            base = self._bucket(t, key) * SLOTS_PER_BUCKET
            keys = self._keys[t]
            for s in range(base, base + SLOTS_PER_BUCKET):
                if keys[s] is None:
                    keys[s] = key
                    self._vals[t][s] = value
                    return True
        return False

    def _place(self, key: int, value: int) -> bool:
        if self._try_direct(key, value):
            return True
        # BFS over eviction paths; mutations happen only once a path to a
        # free slot is known, so a failure leaves every resident in place.
        # Node: (table, bucket, parent node index, slot within parent).
        nodes = [(0, self._bucket(0, key), -1, -1), (1, self._bucket(1, key), -1, -1)]
        seen = {(n[0], n[1]) for n in nodes}
        head = 0
        while head < len(nodes) and len(nodes) < _BFS_NODE_BUDGET:
            t, b, _, _ = nodes[head]
            base = b * SLOTS_PER_BUCKET
            keys = self._keys[t]
            for s in range(SLOTS_PER_BUCKET):
                victim = keys[base + s]
                alt_t = 1 - t
                alt_b = self._bucket(alt_t, victim)
                alt_base = alt_b * SLOTS_PER_BUCKET
                alt_keys = self._keys[alt_t]
                free = next((j for j in range(SLOTS_PER_BUCKET)
                             if alt_keys[alt_base + j] is None), None)
                if free is not None:
                    # Evict the victim to its alternate bucket, then pull
                    # each ancestor's victim into the hole it left behind.
                    alt_keys[alt_base + free] = victim
                    self._vals[alt_t][alt_base + free] = self._vals[t][base + s]
                    hole_t, hole_b, hole_s = t, b, s
                    idx = head
                    while nodes[idx][2] != -1:
                        pidx, pslot = nodes[idx][2], nodes[idx][3]
                        pt, pb = nodes[pidx][0], nodes[pidx][1]
                        pbase = pb * SLOTS_PER_BUCKET
                        hbase = hole_b * SLOTS_PER_BUCKET
                        self._keys[hole_t][hbase + hole_s] = self._keys[pt][pbase + pslot]
                        self._vals[hole_t][hbase + hole_s] = self._vals[pt][pbase + pslot]
                        hole_t, hole_b, hole_s = pt, pb, pslot
                        idx = pidx
                    hbase = hole_b * SLOTS_PER_BUCKET
                    self._keys[hole_t][hbase + hole_s] = key
                    self._vals[hole_t][hbase + hole_s] = value
                    return True
                if (alt_t, alt_b) not in seen:
                    seen.add((alt_t, alt_b))
                    nodes.append((alt_t, alt_b, head, s))
            head += 1
        return False

    def _rebuild(self, pending=None) -> None:
        items = list(self.items())
        if pending is not None:
            items.append(pending)
        while True:
            self.rebuild_count += 1
            self._seeds = [self._rng.next_u64(), self._rng.next_u64()]
            size = self.buckets_per_table * SLOTS_PER_BUCKET
            self._keys = [[None] * size, [None] * size]
            self._vals = [[0] * size, [0] * size]
            self._stash = []
            ok = True
            for k, v in items:
                if not self._place(k, v):
                    if len(self._stash) < STASH_SIZE:
                        self._stash.append([k, v])
                    else:
                        ok = False
                        break
            if ok:
                return

    # -- measurement --------------------------------------------------------

    def space_ledger(self) -> SpaceLedger:
        led = SpaceLedger()
        entry = self.key_bits + self.value_bits + 1
        led.add("tables", 2 * self.buckets_per_table * SLOTS_PER_BUCKET * entry)
        led.add("stash", STASH_SIZE * entry)
        led.add("seeds", 2 * 64)
        led.add("counters", 2 * 64)
        return led

    def space_bits(self) -> int:
        return self.space_ledger().total

    def field_groups(self) -> dict[str, list[tuple[int, int]]]:
        """(value, width) fields per ledger component; widths sum to the ledger."""
        entry_fields = []
        for t in (0, 1):
            keys, vals = self._keys[t], self._vals[t]
            for s, k in enumerate(keys):
                occupied = 0 if k is None else 1
                entry_fields.append((occupied, 1))
                entry_fields.append((k or 0, self.key_bits))
                entry_fields.append((vals[s], self.value_bits))
        stash_fields = []
        for i in range(STASH_SIZE):
            if i < len(self._stash):
                k, v = self._stash[i]
                stash_fields += [(1, 1), (k, self.key_bits), (v, self.value_bits)]
            else:
                stash_fields += [(0, 1), (0, self.key_bits), (0, self.value_bits)]
        return {
            "tables": entry_fields,
            "stash": stash_fields,
            "seeds": [(self._seeds[0], 64), (self._seeds[1], 64)],
            "counters": [(self.occupancy, 64), (self.rebuild_count, 64)],
        }

    def serialize_fields(self) -> list[tuple[int, int]]:
        out = []
        for group in self.field_groups().values():
            out += group
        return out

    def serialize_components(self) -> dict[str, list[int]]:
        return {k: pack_bits(v) for k, v in self.field_groups().items()}


class CodeAllocator:
    """Distinct small-integer codes from [range_size], stack discipline.

    alloc() returns the most recently freed code when one exists, else the
    least never-used code.  Every code is held by at most one live
    allocation; freeing an unheld code is an error.
    """

    def __init__(self, range_size: int):
        if range_size < 0:
            raise ValueError("range size must be nonnegative")
        self.range_size = range_size
        self._free_stack: list[int] = []
        self._next_unused = 0
        self._held: set[int] = set()

    @property
    def allocated(self) -> int:
        return len(self._held)

    @property
    def free(self) -> int:
        return self.range_size - len(self._held)

    def alloc(self) -> int:
        if self._free_stack:
            code = self._free_stack.pop()
        elif self._next_unused < self.range_size:
            code = self._next_unused
            self._next_unused += 1
        else:
            raise ValueError("allocator exhausted")
        self._held.add(code)
        return code

    def free_code(self, code: int) -> None:
        if code not in self._held:
            raise ValueError(f"code {code} is not currently allocated")
        self._held.remove(code)
        self._free_stack.append(code)

    def space_ledger(self) -> SpaceLedger:
        led = SpaceLedger()
        width = max(self.range_size - 1, 0).bit_length()
        led.add("free_stack", self.range_size * width)
        led.add("held_bitmap", self.range_size)
        led.add("counters", 2 * 64)
        return led

    def space_bits(self) -> int:
        return self.space_ledger().total

    def field_groups(self) -> dict[str, list[tuple[int, int]]]:
        width = max(self.range_size - 1, 0).bit_length()
        stack_fields = [(self._free_stack[i] if i < len(self._free_stack) else 0, width)
                        for i in range(self.range_size)]
        bitmap_fields = [(1 if c in self._held else 0, 1) for c in range(self.range_size)]
        return {
            "free_stack": stack_fields,
            "held_bitmap": bitmap_fields,
            "counters": [(self._next_unused, 64), (len(self._free_stack), 64)],
        }

    def serialize_fields(self) -> list[tuple[int, int]]:
        out = []
        for group in self.field_groups().values():
            out += group
        return out

    def serialize_components(self) -> dict[str, list[int]]:
        return {k: pack_bits(v) for k, v in self.field_groups().items()}
