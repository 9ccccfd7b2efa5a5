"""Three-level membership + stable perfect hashing dictionary."""

import pytest

from stabledict.config import Tunables
from stabledict.membdict import MembPhDict, MembPhParams, TileFilterBucket
from stabledict.perm import StoredPerm, sample_stored
from stabledict.rng import SplitMix64


def build(capacity, slack, universe, seed=1, tunables=Tunables()):
    return MembPhDict(MembPhParams(capacity, slack, universe, tunables), SplitMix64(seed))


# -- dispatch -----------------------------------------------------------------


def test_dispatch_large_universe_is_brute():
    # a universe at least capacity^1.5 makes the plain layout space-optimal
    d = build(1 << 10, 1 << 10, 1 << 40)
    assert d.mode == "brute"


def test_dispatch_tiny_slack_is_brute():
    d = build(1 << 12, 8, 1 << 16)
    assert d.mode == "brute"


def test_dispatch_layered():
    d = build(1 << 16, 1 << 14, 1 << 20)
    assert d.mode == "layered"
    assert d.level2 is None   # slack too small to pay for the filter level


def test_dispatch_layered_with_second_level():
    d = build(1 << 16, 1 << 15, 1 << 17)
    assert d.mode == "layered"
    assert d.level2 is not None


def test_fresh_structure_has_no_members():
    d = build(1 << 8, 1 << 8, 1 << 20)
    rng = SplitMix64(0)
    for _ in range(1000):
        assert not d.member(rng.randrange(1 << 20))


# -- basic contracts ----------------------------------------------------------


@pytest.mark.parametrize("cfg", [
    (1 << 8, 1 << 8, 1 << 30),     # brute
    (1 << 10, 1 << 8, 1 << 12),    # layered, no level 2
    (1 << 16, 1 << 15, 1 << 17),   # layered with level 2
])
def test_codes_in_range_and_distinct(cfg):
    n, t, u = cfg
    d = build(n, t, u, seed=3)
    rng = SplitMix64(17)
    codes = {}
    while len(codes) < min(n, 2000):
        x = rng.randrange(u)
        if x in codes:
            continue
        codes[x] = d.insert(x)
    assert all(0 <= c < n + t for c in codes.values())
    assert len(set(codes.values())) == len(codes)
    for x, c in codes.items():
        assert d.member(x)
        assert d.hashcode(x) == c


def test_duplicate_insert_rejected():
    d = build(1 << 8, 0, 1 << 16)
    d.insert(7)
    with pytest.raises(KeyError):
        d.insert(7)


def test_capacity_enforced():
    d = build(4, 0, 16)
    for x in (1, 2, 3, 4):
        d.insert(x)
    with pytest.raises(ValueError):
        d.insert(5)


def test_insert_delete_member_cycle():
    d = build(1 << 8, 1 << 8, 1 << 20)
    d.insert(12345)
    assert d.member(12345)
    d.delete(12345)
    assert not d.member(12345)
    with pytest.raises(KeyError):
        d.delete(12345)
    with pytest.raises(KeyError):
        d.hashcode(12345)


def test_delete_preserves_other_codes():
    d = build(1 << 8, 1 << 8, 1 << 20)
    cx = d.insert(111)
    cy = d.insert(222)
    d.delete(111)
    assert d.hashcode(222) == cy
    assert cx != cy


def test_reinsert_may_reuse_codes_but_stays_valid():
    d = build(1 << 8, 0, 1 << 16)
    first = d.insert(9)
    d.delete(9)
    d.insert(10)   # may take 9's freed code
    second = d.insert(9)
    assert 0 <= second < (1 << 8)
    assert d.hashcode(9) == second
    assert d.hashcode(9) != d.hashcode(10)
    assert first in (second, d.hashcode(10), first)


def test_hashcode_stable_under_churn():
    d = build(1 << 10, 1 << 10, 1 << 20, seed=5)
    rng = SplitMix64(29)
    codes = {}
    for step in range(20_000):
        if (rng.randrange(2) and len(codes) < (1 << 10)) or not codes:
            x = rng.randrange(1 << 20)
            if x in codes:
                continue
            codes[x] = d.insert(x)
        else:
            x = next(iter(codes))
            assert d.hashcode(x) == codes[x]
            d.delete(x)
            del codes[x]
        if step % 500 == 0:
            for x, c in list(codes.items())[:20]:
                assert d.hashcode(x) == c
    assert d.full_rebuilds == 0


# -- layered internals ----------------------------------------------------------


def test_level1_code_budget_structural():
    for (n, t, u) in [(1 << 16, 1 << 14, 1 << 20), (1 << 16, 1 << 15, 1 << 17),
                      (1 << 12, 1 << 10, 1 << 16)]:
        d = build(n, t, u)
        if d.mode != "layered":
            continue
        t_eff = d.params.slack_eff
        assert d.b1 * d.bucket_range <= n + -(-t_eff // 3)
        if d.level2 is not None:
            assert d.level2.b2 * d.level2.sum_m <= d.block_b
        assert d.block_a + d.block_b + d.block_c == t_eff


def test_level_blocks_partition_the_slack():
    d = build(1 << 16, 1 << 15, 1 << 17)
    n = 1 << 16
    # level-1 codes below n + block_a; level-2 inside its block; level 3 after
    rng = SplitMix64(2)
    seen_l2 = False
    codes = {}
    while len(codes) < (1 << 14):
        x = rng.randrange(1 << 17)
        if x in codes:
            continue
        c = d.insert(x)
        codes[x] = c
        if n + d.block_a <= c < n + d.block_a + d.block_b:
            seen_l2 = True
    assert all(c < n + d.params.slack_eff for c in codes.values())


def test_space_constant_under_operations():
    d = build(1 << 10, 1 << 8, 1 << 12, seed=9)
    before = d.space_bits()
    rng = SplitMix64(31)
    keys = set()
    while len(keys) < 500:
        keys.add(rng.randrange(1 << 12))
    for x in keys:
        d.insert(x)
    assert d.space_bits() == before
    for x in keys:
        d.delete(x)
    assert d.space_bits() == before


def test_brute_space_envelope():
    # full keys plus codes, times layout constants, lands inside [n lg u, 8 n lg u]
    n, u_bits = 1 << 8, 40
    d = build(n, 1 << 8, 1 << u_bits)
    assert d.mode == "brute"
    bits = d.space_bits()
    assert n * u_bits <= bits <= 8 * n * u_bits


def test_space_equals_sum_of_components():
    d = build(1 << 16, 1 << 15, 1 << 17)
    led = d.space_ledger()
    assert led.total == sum(led.entries.values())
    parts = (led.get("params") + led.get("counters")
             + sum(v for k, v in led.entries.items() if k.startswith(("level1", "level2", "level3"))))
    assert parts == led.total


# -- tile filter buckets ----------------------------------------------------------


def _bucket(v=64, tiles=(8, 4), seed=0):
    rng = SplitMix64(seed)
    perms = [sample_stored(v, rng) for _ in tiles]
    return TileFilterBucket(v, list(tiles), perms)


def test_tile_insert_empty_lands_level_zero():
    b = _bucket()
    level, tile = b.insert(17)
    assert level == 0
    assert b.query(17) == (0, tile)


def test_tile_conflict_falls_through_or_overflows():
    v = 16
    b = TileFilterBucket(v, [4], [StoredPerm.identity(v)])
    assert b.insert(0) == (0, 0)
    spot = b.insert(1)          # same level-0 tile as 0 (tile size 4)
    assert spot is None         # single level: a conflict overflows
    b2 = TileFilterBucket(v, [4, 2], [StoredPerm.identity(v), StoredPerm.identity(v)])
    assert b2.insert(0) == (0, 0)
    assert b2.insert(1) == (1, 0)   # second level catches the conflict


def test_tile_occupancy_bounded_by_slot_count():
    b = _bucket(v=64, tiles=(8, 4), seed=4)
    stored = 0
    for q in range(64):
        if b.query(q) is None and b.insert(q) is not None:
            stored += 1
    assert stored <= 8 + 4


def test_tile_duplicate_insert_rejected():
    b = _bucket()
    b.insert(5)
    with pytest.raises(KeyError):
        b.insert(5)


def test_tile_query_never_inserted_is_absent():
    b = _bucket()
    assert b.query(33) is None


def test_tile_delete_absent_raises():
    b = _bucket()
    with pytest.raises(KeyError):
        b.delete(12)


def test_tile_matches_naive_simulation():
    """Insert a set, delete half, and compare every query against a naive
    per-level replay of the same rule."""
    v, tiles, seed = 128, [8, 4, 2], 11
    rng = SplitMix64(seed)
    perms = [sample_stored(v, rng) for _ in tiles]
    b = TileFilterBucket(v, tiles, perms)

    class Naive:
        def __init__(self):
            self.slots = [dict() for _ in tiles]   # level -> tile -> q

        def insert(self, q):
            for i, perm in enumerate(perms):
                tile = perm.apply(q) * tiles[i] // v
                if tile not in self.slots[i]:
                    self.slots[i][tile] = q
                    return (i, tile)
            return None

        def query(self, q):
            for i in range(len(tiles)):
                for tile, stored in self.slots[i].items():
                    if stored == q:
                        return (i, tile)
            return None

        def delete(self, q):
            spot = self.query(q)
            del self.slots[spot[0]][spot[1]]

    naive = Naive()
    inserted = []
    qrng = SplitMix64(77)
    while len(inserted) < 12:
        q = qrng.randrange(v)
        if naive.query(q) is not None:
            continue
        assert b.insert(q) == naive.insert(q)
        if naive.query(q) is not None:
            inserted.append(q)
    for q in inserted[::2]:
        b.delete(q)
        naive.delete(q)
    for q in range(v):
        assert b.query(q) == naive.query(q)


def test_tile_keys_roundtrip():
    b = _bucket(v=64, tiles=(8,), seed=3)
    queries = [5, 9, 33, 60]
    stored = [q for q in queries if b.insert(q) is not None]
    assert sorted(b.keys()) == sorted(stored)


# -- full rebuild path ------------------------------------------------------------


def test_full_rebuild_reassigns_codes_and_counts():
    d = build(1 << 10, 1 << 8, 1 << 12, seed=13)
    assert d.mode == "layered"
    keys = set()
    rng = SplitMix64(4)
    while len(keys) < 600:
        keys.add(rng.randrange(1 << 12))
    for x in keys:
        d.insert(x)
    before = {x: d.hashcode(x) for x in keys}
    d._full_rebuild(pending_key=next(iter(set(range(1 << 12)) - keys)))
    assert d.full_rebuilds >= 1
    for x in keys:
        assert d.member(x)   # the set survives a rebuild even as codes move
    codes = [d.hashcode(x) for x in keys]
    assert len(set(codes)) == len(codes)
