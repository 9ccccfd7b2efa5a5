"""Dynamic dictionary with membership and stable perfect hashing.

Holds up to `capacity` keys from a power-of-two universe and assigns each
resident key a hashcode in [capacity + slack] that never changes while the
key is resident.  Codes freed by deletions may be reused later.

Two modes, picked at construction:

* brute: a single exact dictionary mapping full keys to codes drawn from a
  free list over [capacity].  Chosen when the universe is large relative to
  capacity (u >= n^1.5) or the slack is small (<= about sqrt(n)), where the
  plain layout is already within the space budget.
* layered: three levels, each with its own disjoint hashcode block.  An
  insert lands at the first level with room.

  1. A quotient hash splits the universe into buckets of expected load mu;
    each bucket is a small dictionary from quotients to bucket-local codes
    with a bounded code range, so level-1 codes fit in
    [capacity + slack_eff/3].  Failed or overfull inserts fall through.
  2. (Only when the slack is large enough to pay for it.)  A second quotient
    hash into shallow buckets; each bucket is a cascade of tile filters
    whose slots store within-tile indices.  The occupied (level, tile) pair
    IS the code, so this level stores no explicit code map at all.
  3. A last exact dictionary over full keys for the trickle of keys the
    filters reject.

Deletions remove the key from whichever level holds it; keys never migrate
between levels while resident, which is what makes the codes stable.  If
level 3 ever fills, the whole structure reseeds and rebuilds (counted in
`full_rebuilds`; the one event that reassigns codes).

Single writer per instance; reads may run concurrently between mutations.
"""

from __future__ import annotations

import math

from .basedict import BaseDict, CodeAllocator
from .config import Tunables, ceil_lg, next_pow2, pow2_floor, sqrt_threshold
from .perm import StoredPerm, sample_stored
from .qhf import QhfParams, QuotientHashFn, sample_qhf
from .rng import SplitMix64
from .spacemeter import SpaceLedger, pack_bits

__all__ = ["MembPhParams", "MembPhDict", "TileFilterBucket"]

# Second-level permutation tables blow up past this bucket-universe size;
# parameter sets that reach it are served by brute mode instead.
MAX_TILE_UNIVERSE = 1 << 20

_FULL_REBUILD_LIMIT = 50


class MembPhParams:
    """Validated sizing for a membership + perfect-hashing dictionary."""

    def __init__(self, capacity: int, slack: int, universe: int,
                 tunables: Tunables = Tunables()):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if slack < 0:
            raise ValueError("slack must be nonnegative")
        if universe < capacity or universe & (universe - 1):
            raise ValueError("universe must be a power of two >= capacity")
        if not 0 < tunables.c1 <= 1 / 3:
            raise ValueError("c1 must be in (0, 1/3]")
        self.capacity = capacity
        self.slack = slack
        self.universe = universe
        self.tunables = tunables
        # Slack beyond capacity^2/universe cannot buy space, so internal
        # sizing clamps it; the external code range stays [capacity+slack].
        self.slack_eff = min(slack, max(1, capacity * capacity // universe))

    @property
    def code_range(self) -> int:
        return self.capacity + self.slack

    def brute_force(self) -> bool:
        n, u = self.capacity, self.universe
        return u * u >= n * n * n or self.slack_eff <= sqrt_threshold(n)


class TileFilterBucket:
    """Cascade of tile filters over a small bucket universe.

    Level i splits the (permuted) bucket universe into tile_counts[i] tiles
    and keeps one slot per tile: an occupied flag plus the within-tile index
    of the single resident key mapped there.  Because each level's
    permutation is a bijection, (level, tile, index) identifies the key
    exactly; queries are exact, never approximate.
    """

    __slots__ = ("universe", "tile_counts", "perms", "_idx_bits", "_occ", "_idx")

    def __init__(self, universe: int, tile_counts: list[int], perms: list[StoredPerm]):
        self.universe = universe
        self.tile_counts = tile_counts
        self.perms = perms
        self._idx_bits = [ceil_lg(universe // m) for m in tile_counts]
        self._occ = [[False] * m for m in tile_counts]
        self._idx = [[0] * m for m in tile_counts]

    def insert(self, q: int):
        """Place q at the first level whose tile is empty.

        Returns (level, tile) or None when every level conflicts.
        Inserting a stored value is an error.
        """
        spot = self.query(q)
        if spot is not None:
            raise KeyError(f"value {q} already stored")
        for i, perm in enumerate(self.perms):
            p = perm.apply(q)
            tile = p >> self._idx_bits[i]
            if not self._occ[i][tile]:
                self._occ[i][tile] = True
                self._idx[i][tile] = p & ((1 << self._idx_bits[i]) - 1)
                return i, tile
        return None

    def query(self, q: int):
        """(level, tile) holding q, or None."""
        for i, perm in enumerate(self.perms):
            p = perm.apply(q)
            tile = p >> self._idx_bits[i]
            if self._occ[i][tile] and self._idx[i][tile] == p & ((1 << self._idx_bits[i]) - 1):
                return i, tile
        return None

    def delete(self, q: int) -> None:
        spot = self.query(q)
        if spot is None:
            raise KeyError(f"value {q} not stored")
        i, tile = spot
        self._occ[i][tile] = False
        self._idx[i][tile] = 0

    def keys(self):
        """Reconstruct all stored bucket-universe values."""
        for i, perm in enumerate(self.perms):
            bits = self._idx_bits[i]
            for tile, occ in enumerate(self._occ[i]):
                if occ:
                    yield perm.invert((tile << bits) | self._idx[i][tile])

    def slot_bits(self) -> int:
        return sum(m * (1 + bits) for m, bits in zip(self.tile_counts, self._idx_bits))

    def slot_fields(self) -> list[tuple[int, int]]:
        fields = []
        for i, m in enumerate(self.tile_counts):
            bits = self._idx_bits[i]
            for tile in range(m):
                fields.append((1 if self._occ[i][tile] else 0, 1))
                fields.append((self._idx[i][tile], bits))
        return fields


class MembPhDict:
    """Membership + stable perfect hashing into [capacity + slack]."""

    def __init__(self, params: MembPhParams, rng: SplitMix64):
        self.params = params
        self._rng = rng.spawn()
        self.live_count = 0
        self.full_rebuilds = 0
        self._lu = ceil_lg(params.universe)
        self.mode = "brute" if params.brute_force() else "layered"
        if self.mode == "layered":
            built = self._build_layered()
            if not built:
                self.mode = "brute"
        if self.mode == "brute":
            self._build_brute()

    # -- construction -----------------------------------------------------

    def _build_brute(self) -> None:
        n = self.params.capacity
        self.brute_dict = BaseDict(
            key_bits=self._lu, value_bits=max(1, ceil_lg(n)), capacity=n,
            rng=self._rng, policy="rebuild")
        self.brute_alloc = CodeAllocator(n)

    def _build_layered(self) -> bool:
        p = self.params
        n, u, tn = p.capacity, p.universe, p.tunables
        t_eff = p.slack_eff
        # Disjoint hashcode blocks: [0, n+sa), [n+sa, n+sa+sb), then sc.
        self.block_a = -(-t_eff // 3)
        self.block_b = -(-(t_eff - self.block_a) // 2)
        self.block_c = t_eff - self.block_a - self.block_b

        mu = next_pow2(max(8, math.ceil(tn.c2 * (n / t_eff) ** 3)))
        if mu > n:
            mu = next_pow2(n)
        b1 = max(1, next_pow2(max(1, -(-n // mu))))
        while b1 * mu > n + self.block_a and mu > 1:
            mu //= 2          # non-power-of-two capacity corner
        slack1 = min(math.ceil(mu ** (2 / 3)), (n + self.block_a - b1 * mu) // b1)
        if slack1 < 0:
            return False
        self.mu = mu
        self.bucket_range = mu + slack1
        self.b1 = b1
        ident = tn.debug_identity
        self.qhf1 = sample_qhf(
            QhfParams(u, b1, n, alpha=tn.alpha, delta=tn.delta, debug_identity=ident),
            self._rng)
        quot_bits = self._lu - ceil_lg(b1)
        code_bits = max(1, ceil_lg(self.bucket_range))
        self.bucket_dicts = [
            BaseDict(quot_bits, code_bits, self.bucket_range, self._rng, policy="no_rebuild")
            for _ in range(b1)]
        self.bucket_allocs = [CodeAllocator(self.bucket_range) for _ in range(b1)]

        # Level 2 exists only when the slack is large enough to matter.
        self.level2 = None
        lgn = math.log2(n)
        if tn.c1 * t_eff > n / lgn and self.block_b > 0:
            q4 = lgn ** 0.25
            h = max(1, int(math.log2(lgn) / 8))
            tile_counts = [next_pow2(max(1, math.ceil(tn.c4 * q4 / (1 << i))))
                           for i in range(h)]
            sum_m = sum(tile_counts)
            b2 = next_pow2(max(1, math.ceil(tn.c1 * t_eff / q4)))
            if self.block_b // sum_m >= 1:
                b2 = min(b2, pow2_floor(self.block_b // sum_m))
                v = u // b2
                if v > MAX_TILE_UNIVERSE:
                    return False
                tile_counts = [min(m, v) for m in tile_counts]
                pool_count = math.ceil(n ** (2 / 3))
                pools = [[sample_stored(v, self._rng) for _ in range(h)]
                         for _ in range(pool_count)] if v > 1 else []
                if v > 1:
                    self.level2 = _Level2(u, b2, n, v, tile_counts, pools, tn, self._rng)

        sc = max(self.block_c, 0)
        self.level3_dict = None
        self.level3_alloc = None
        if sc > 0:
            self.level3_dict = BaseDict(self._lu, max(1, ceil_lg(sc)), sc,
                                        self._rng, policy="rebuild")
            self.level3_alloc = CodeAllocator(sc)
        return True

    # -- operations ---------------------------------------------------------

    def insert(self, key: int) -> int:
        """Insert a new key; returns its stable hashcode."""
        if not 0 <= key < self.params.universe:
            raise ValueError("key outside universe")
        if self.live_count >= self.params.capacity and not self.member(key):
            raise ValueError("capacity exceeded")
        code = self._insert_any_level(key)
        if code is None:
            code = self._full_rebuild(key)
        self.live_count += 1
        return code

    def _insert_any_level(self, key: int):
        """One walk doubles as the duplicate check and the placement."""
        if self.mode == "brute":
            if self.brute_dict.lookup(key) is not None:
                raise KeyError(f"key {key} already resident")
            code = self.brute_alloc.alloc()
            self.brute_dict.insert(key, code)
            return code
        b, q = self.qhf1.eval(key)
        bucket = self.bucket_dicts[b]
        if bucket.lookup(q) is not None:
            raise KeyError(f"key {key} already resident")
        alloc = self.bucket_allocs[b]
        placed = None
        if alloc.free > 0:
            code = alloc.alloc()
            out = bucket.insert(q, code)
            if out == "inserted":
                placed = b * self.bucket_range + code
            else:
                alloc.free_code(code)   # displacement failed; pass the key down
        if self.level2 is not None:
            spot = self.level2.insert(key, already_placed=placed is not None)
            if spot is not None:
                placed = self.params.capacity + self.block_a + spot
        if self.level3_dict is not None:
            if self.level3_dict.lookup(key) is not None:
                if placed is not None:
                    self._unplace(key, placed)
                raise KeyError(f"key {key} already resident")
            if placed is None and self.level3_alloc.free > 0:
                code = self.level3_alloc.alloc()
                self.level3_dict.insert(key, code)
                placed = self.params.capacity + self.block_a + self.block_b + code
        return placed

    def _unplace(self, key: int, code: int):
        # Roll back a placement made before a duplicate was discovered at a
        # deeper level.  Rare: only a contract-violating insert reaches it.
        self.live_count += 1
        self.delete(key)
        self.live_count -= 1

    def member(self, key: int) -> bool:
        """Exact membership; no false positives."""
        if not 0 <= key < self.params.universe:
            raise ValueError("key outside universe")
        return self._locate(key) is not None

    def hashcode(self, key: int) -> int:
        """The code assigned at insertion; raises KeyError when not resident."""
        code = self._locate(key)
        if code is None:
            raise KeyError(f"key {key} not resident")
        return code

    def _locate(self, key: int):
        if self.mode == "brute":
            return self.brute_dict.lookup(key)
        b, q = self.qhf1.eval(key)
        code = self.bucket_dicts[b].lookup(q)
        if code is not None:
            return b * self.bucket_range + code
        if self.level2 is not None:
            spot = self.level2.locate(key)
            if spot is not None:
                return self.params.capacity + self.block_a + spot
        if self.level3_dict is not None:
            code = self.level3_dict.lookup(key)
            if code is not None:
                return self.params.capacity + self.block_a + self.block_b + code
        return None

    def delete(self, key: int) -> None:
        """Remove a resident key from the one level that stores it."""
        if not 0 <= key < self.params.universe:
            raise ValueError("key outside universe")
        if self.mode == "brute":
            code = self.brute_dict.lookup(key)
            if code is None:
                raise KeyError(f"key {key} not resident")
            self.brute_dict.delete(key)
            self.brute_alloc.free_code(code)
            self.live_count -= 1
            return
        b, q = self.qhf1.eval(key)
        code = self.bucket_dicts[b].lookup(q)
        if code is not None:
            self.bucket_dicts[b].delete(q)
            self.bucket_allocs[b].free_code(code)
            self.live_count -= 1
            return
        if self.level2 is not None and self.level2.delete(key):
            self.live_count -= 1
            return
        if self.level3_dict is not None:
            code = self.level3_dict.lookup(key)
            if code is not None:
                self.level3_dict.delete(key)
                self.level3_alloc.free_code(code)
                self.live_count -= 1
                return
        raise KeyError(f"key {key} not resident")

    # -- rebuild ------------------------------------------------------------

    def _all_keys(self) -> list[int]:
        if self.mode == "brute":
            return [k for k, _ in self.brute_dict.items()]
        keys = []
        for b, d in enumerate(self.bucket_dicts):
            for q, _ in d.items():
                keys.append(self.qhf1.invert(b, q))
        if self.level2 is not None:
            keys.extend(self.level2.all_keys())
        if self.level3_dict is not None:
            keys.extend(k for k, _ in self.level3_dict.items())
        return keys

    def _full_rebuild(self, pending_key: int) -> int:
        """Reseed and reinsert everything; the only code-reassigning event."""
        keys = self._all_keys()
        keys.append(pending_key)
        for _ in range(_FULL_REBUILD_LIMIT):
            self.full_rebuilds += 1
            if self.mode == "brute":
                self._build_brute()
            else:
                if not self._build_layered():
                    raise RuntimeError("layered sizing failed during rebuild")
            pending_code = None
            ok = True
            for k in keys:
                code = self._insert_any_level(k)
                if code is None:
                    ok = False
                    break
                if k == pending_key:
                    pending_code = code
            if ok:
                return pending_code
        raise RuntimeError("structure rebuild failed repeatedly")

    # -- measurement ----------------------------------------------------------

    def space_ledger(self) -> SpaceLedger:
        led = SpaceLedger()
        led.add("params", 4 * 64)
        led.add("counters", 2 * 64)
        if self.mode == "brute":
            _merge(led, "dict", self.brute_dict.space_ledger())
            _merge(led, "allocator", self.brute_alloc.space_ledger())
            return led
        _merge(led, "level1.qhf", self.qhf1.describe_space())
        led.add("level1.dicts", sum(d.space_bits() for d in self.bucket_dicts))
        led.add("level1.allocators", sum(a.space_bits() for a in self.bucket_allocs))
        if self.level2 is not None:
            self.level2.add_space(led)
        if self.level3_dict is not None:
            _merge(led, "level3.dict", self.level3_dict.space_ledger())
            _merge(led, "level3.allocator", self.level3_alloc.space_ledger())
        return led

    def space_bits(self) -> int:
        return self.space_ledger().total

    def serialize_components(self) -> dict[str, list[int]]:
        p = self.params
        out = {
            "params": pack_bits([(p.capacity, 64), (p.slack, 64),
                                 (p.universe, 64), (1, 64)]),
            "counters": pack_bits([(self.live_count, 64), (self.full_rebuilds, 64)]),
        }
        if self.mode == "brute":
            _merge_words(out, "dict", self.brute_dict.serialize_components())
            _merge_words(out, "allocator", self.brute_alloc.serialize_components())
            return out
        _merge_words(out, "level1.qhf", self.qhf1.serialize_components())
        fields = []
        for d in self.bucket_dicts:
            fields += d.serialize_fields()
        out["level1.dicts"] = pack_bits(fields)
        fields = []
        for a in self.bucket_allocs:
            fields += a.serialize_fields()
        out["level1.allocators"] = pack_bits(fields)
        if self.level2 is not None:
            self.level2.add_words(out)
        if self.level3_dict is not None:
            _merge_words(out, "level3.dict", self.level3_dict.serialize_components())
            _merge_words(out, "level3.allocator", self.level3_alloc.serialize_components())
        return out


class _Level2:
    """Second filter level: shallow hash buckets of cascaded tile filters."""

    def __init__(self, u, b2, n, v, tile_counts, pools, tn: Tunables, rng: SplitMix64):
        self.b2 = b2
        self.v = v
        self.tile_counts = tile_counts
        self.sum_m = sum(tile_counts)
        self.offsets = [sum(tile_counts[:i]) for i in range(len(tile_counts))]
        self.pools = pools
        self.qhf = sample_qhf(
            QhfParams(u, b2, n, alpha=tn.alpha, delta=tn.delta,
                      debug_identity=tn.debug_identity), rng)
        self.buckets = [
            TileFilterBucket(v, tile_counts, pools[i % len(pools)])
            for i in range(b2)]

    def insert(self, key: int):
        b, q = self.qhf.eval(key)
        spot = self.buckets[b].insert(q)
        if spot is None:
            return None
        level, tile = spot
        return b * self.sum_m + self.offsets[level] + tile

    def locate(self, key: int):
        b, q = self.qhf.eval(key)
        spot = self.buckets[b].query(q)
        if spot is None:
            return None
        level, tile = spot
        return b * self.sum_m + self.offsets[level] + tile

    def delete(self, key: int) -> bool:
        b, q = self.qhf.eval(key)
        if self.buckets[b].query(q) is None:
            return False
        self.buckets[b].delete(q)
        return True

    def all_keys(self):
        for b, bucket in enumerate(self.buckets):
            for q in bucket.keys():
                yield self.qhf.invert(b, q)

    def add_space(self, led: SpaceLedger) -> None:
        _merge(led, "level2.qhf", self.qhf.describe_space())
        led.add("level2.slots", sum(b.slot_bits() for b in self.buckets))
        led.add("level2.pool", sum(p.space_bits() for pool in self.pools for p in pool))

    def add_words(self, out: dict) -> None:
        _merge_words(out, "level2.qhf", self.qhf.serialize_components())
        fields = []
        for b in self.buckets:
            fields += b.slot_fields()
        out["level2.slots"] = pack_bits(fields)
        fields = []
        w = max(self.v - 1, 0).bit_length()
        for pool in self.pools:
            for perm in pool:
                for x in perm.forward:
                    fields.append((x, w))
                for x in perm.inverse:
                    fields.append((x, w))
        out["level2.pool"] = pack_bits(fields)


def _merge(led: SpaceLedger, prefix: str, child: SpaceLedger) -> None:
    for name, bits in child.entries.items():
        led.add(f"{prefix}.{name}", bits)


def _merge_words(out: dict, prefix: str, child: dict) -> None:
    for name, words in child.items():
        out[f"{prefix}.{name}"] = words
