"""Quotient hash functions: layout, bijectivity, censuses, space."""

import numpy as np
import pytest

from stabledict.qhf import QhfParams, sample_qhf
from stabledict.rng import SplitMix64, derive_seed


def test_params_validation():
    with pytest.raises(ValueError):
        QhfParams(universe=100, buckets=4, max_keys=8)     # u not a power of two
    with pytest.raises(ValueError):
        QhfParams(universe=16, buckets=3, max_keys=8)      # b not a power of two
    with pytest.raises(ValueError):
        QhfParams(universe=16, buckets=32, max_keys=8)     # b > u
    with pytest.raises(ValueError):
        QhfParams(universe=16, buckets=4, max_keys=17)     # n > u
    with pytest.raises(ValueError):
        QhfParams(universe=16, buckets=4, max_keys=8, alpha=1.0)


def _identity16():
    return sample_qhf(QhfParams(16, 4, 8, debug_identity=True), SplitMix64(0))


def test_identity_layout_eval():
    h = _identity16()
    assert h.eval(13) == (3, 1)        # 13 = 3*4 + 1
    assert h.eval(0) == (0, 0)
    assert h.eval(5) == (1, 1)
    assert h.eval(15) == (3, 3)


def test_identity_layout_invert():
    h = _identity16()
    assert h.invert(3, 1) == 13


def test_eval_rejects_out_of_universe():
    h = _identity16()
    with pytest.raises(ValueError):
        h.eval(16)
    with pytest.raises(ValueError):
        h.invert(4, 0)
    with pytest.raises(ValueError):
        h.invert(0, 4)


def test_sampling_is_deterministic_in_the_seed():
    p = QhfParams(1 << 20, 1 << 8, 1 << 10)
    h1 = sample_qhf(p, SplitMix64(12345))
    h2 = sample_qhf(p, SplitMix64(12345))
    rng = SplitMix64(777)
    for _ in range(1000):
        x = rng.randrange(1 << 20)
        assert h1.eval(x) == h2.eval(x)


@pytest.mark.parametrize("lb,n", [(2, 1 << 8), (4, 1 << 8), (8, 1 << 8),
                                  (12, 1 << 8), (6, 1 << 10), (3, 1 << 6)])
def test_bijectivity_exhaustive_and_inverse_hits_once(lb, n):
    u = 1 << 12
    h = sample_qhf(QhfParams(u, 1 << lb, n), SplitMix64(derive_seed(5, lb)))
    xs = np.arange(u, dtype=np.uint64)
    bk, qt = h.eval_batch(xs)
    assert int(bk.max()) < 1 << lb
    assert int(qt.max()) < u >> lb
    flat = bk * np.uint64(u >> lb) + qt
    assert len(np.unique(flat)) == u
    # exhaustive inverse: every (bucket, quotient) pair hits a distinct key
    all_b = np.repeat(np.arange(1 << lb, dtype=np.uint64), u >> lb)
    all_q = np.tile(np.arange(u >> lb, dtype=np.uint64), 1 << lb)
    keys = h.invert_batch(all_b, all_q)
    assert len(np.unique(keys)) == u


def test_scalar_and_batch_agree():
    for lb, n in ((4, 1 << 10), (10, 1 << 10), (8, 1 << 6)):
        h = sample_qhf(QhfParams(1 << 14, 1 << lb, n), SplitMix64(lb * 7 + n))
        xs = np.arange(0, 1 << 14, 13, dtype=np.uint64)
        bk, qt = h.eval_batch(xs)
        for i, x in enumerate(xs.tolist()):
            assert h.eval(int(x)) == (int(bk[i]), int(qt[i]))
            assert h.invert(int(bk[i]), int(qt[i])) == x


def test_roundtrip_at_full_word_universe():
    h = sample_qhf(QhfParams(1 << 64, 1 << 12, 1 << 10), SplitMix64(3))
    rng = np.random.default_rng(9)
    xs = rng.integers(0, 1 << 63, size=100_000, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    bk, qt = h.eval_batch(xs)
    assert np.array_equal(h.invert_batch(bk, qt), xs)
    x = int(xs[0])
    assert h.invert(*h.eval(x)) == x


def test_census_single_full_bucket():
    h = _identity16()
    census = h.collision_census([0, 1, 2, 3], 2)
    assert census.count == 4
    assert census.threshold == 2


def test_census_one_per_bucket():
    h = _identity16()
    assert h.collision_census([0, 4, 8, 12], 2).count == 0


def test_census_histogram():
    h = _identity16()
    census = h.collision_census([0, 1, 4, 8, 12], 2, with_histogram=True)
    assert census.bucket_loads == {1: 3, 2: 1}
    assert census.count == 2


def test_census_matches_naive_two_pass_recount():
    h = sample_qhf(QhfParams(1 << 20, 1 << 6, 1 << 10), SplitMix64(21))
    rng = np.random.default_rng(4)
    keys = rng.choice(1 << 20, size=1 << 10, replace=False).astype(np.uint64)
    for tau in (2, 17, 20, 25):
        got = h.collision_census(keys, tau).count
        loads = {}
        for x in keys.tolist():
            b = h.eval(int(x))[0]
            loads[b] = loads.get(b, 0) + 1
        naive = sum(load for load in loads.values() if load >= tau)
        assert got == naive


def test_census_rejects_oversized_sets():
    h = sample_qhf(QhfParams(1 << 10, 1 << 4, 4), SplitMix64(0))
    with pytest.raises(ValueError):
        h.collision_census(list(range(5)), 2)


# -- dynamic overflow accounting ------------------------------------------


def test_trace_distinct_buckets_is_zero():
    h = _identity16()
    ops = [("i", 0), ("i", 4), ("i", 8), ("i", 12)]
    assert h.overflow_trace(ops, 1) == 0


def test_trace_counts_each_insertion_independently():
    h = _identity16()
    # bucket 0 holds key 1 throughout; key 0 is judged anew at each insert
    ops = [("i", 1), ("i", 0), ("d", 0), ("i", 0)]
    assert h.overflow_trace(ops, 1) == 1
    # once the co-resident leaves, a re-insert is judged against an empty bucket
    ops = [("i", 1), ("i", 0), ("d", 0), ("d", 1), ("i", 0)]
    assert h.overflow_trace(ops, 1) == 0


def test_trace_insert_only_matches_incremental_oracle():
    h = sample_qhf(QhfParams(1 << 16, 1 << 6, 1 << 9), SplitMix64(77))
    rng = np.random.default_rng(8)
    keys = rng.choice(1 << 16, size=1 << 9, replace=False).tolist()
    ops = [("i", int(k)) for k in keys]
    capacity = 3
    # oracle: naive replay of the census rule, one insertion at a time
    loads, flags = {}, {}
    for k in keys:
        b = h.eval(int(k))[0]
        flags[k] = loads.get(b, 0) >= capacity
        loads[b] = loads.get(b, 0) + 1
    assert h.overflow_trace(ops, capacity) == sum(flags.values())


def test_trace_mixed_workload_matches_oracle():
    h = sample_qhf(QhfParams(1 << 14, 1 << 5, 1 << 8), SplitMix64(13))
    rng = SplitMix64(101)
    ops, live = [], set()
    for _ in range(4000):
        if live and rng.randrange(2):
            k = min(live, key=lambda v: (v * 0x9E37 + rng.randrange(3)) & 0xFFFF)
            live.remove(k)
            ops.append(("d", k))
        else:
            if len(live) >= (1 << 8):
                continue
            k = rng.randrange(1 << 14)
            if k in live:
                continue
            live.add(k)
            ops.append(("i", k))
    capacity = 2
    loads, flags = {}, {}
    for op, k in ops:
        b = h.eval(k)[0]
        if op == "i":
            flags[k] = loads.get(b, 0) >= capacity
            loads[b] = loads.get(b, 0) + 1
        else:
            del flags[k]
            loads[b] -= 1
    assert h.overflow_trace(ops, capacity) == sum(flags.values())


def test_trace_rejects_malformed_workloads():
    h = _identity16()
    with pytest.raises(ValueError):
        h.overflow_trace([("d", 3)], 1)
    with pytest.raises(ValueError):
        h.overflow_trace([("i", 3), ("i", 3)], 1)


# -- space ------------------------------------------------------------------


def test_identity_space_is_params_only():
    h = _identity16()
    led = h.describe_space()
    assert set(led.entries) == {"params"}


def test_narrow_mode_charges_group_tables():
    h = sample_qhf(QhfParams(1 << 16, 1 << 4, 1 << 10), SplitMix64(2))
    led = h.describe_space()
    # stored tables: group_count tables of group_size entries, forward and
    # inverse, each entry lg(group_size) bits
    floor_bits = h.group_count * h.group_size * max(h.group_size - 1, 0).bit_length()
    assert led.get("group_perms") >= floor_bits


def test_space_total_matches_component_resummation():
    h = sample_qhf(QhfParams(1 << 16, 1 << 4, 1 << 10), SplitMix64(2))
    led = h.describe_space()
    independent = (5 * 64 + h.reduce.space_bits() + h.shifts.space_bits()
                   + h.columns * 2 * h.k_row
                   + sum(g.space_bits() for g in h._groups))
    assert led.total == independent


def test_space_envelope_for_medium_function():
    h = sample_qhf(QhfParams(1 << 20, 1 << 12, 1 << 10), SplitMix64(6))
    assert h.describe_space().total <= (1 << 10) * 64  # well under 2^10 words
