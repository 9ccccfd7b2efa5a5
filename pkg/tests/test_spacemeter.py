"""Ledger arithmetic, the arena memory model, and accounting honesty."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabledict.basedict import BaseDict, CodeAllocator
from stabledict.config import Tunables
from stabledict.membdict import MembPhDict, MembPhParams
from stabledict.phdict import PhOnlyDict, PhOnlyParams
from stabledict.qhf import QhfParams, sample_qhf
from stabledict.retrieval import RetrievalDict
from stabledict.rng import SplitMix64
from stabledict.spacemeter import ArenaModel, SpaceLedger, pack_bits


def test_ledger_empty_total_zero():
    assert SpaceLedger().total == 0


def test_ledger_add_totals():
    led = SpaceLedger()
    led.add("a", 10)
    led.add("b", 5)
    assert led.total == 15
    assert led.get("a") == 10


def test_ledger_underflow_rejected():
    led = SpaceLedger()
    led.add("a", 4)
    with pytest.raises(ValueError):
        led.sub("a", 5)
    with pytest.raises(ValueError):
        led.add("a", -1)


@given(st.lists(st.tuples(st.sampled_from("abcd"), st.integers(0, 1000),
                          st.booleans()), max_size=60))
@settings(max_examples=60)
def test_ledger_matches_independent_resummation(ops):
    led = SpaceLedger()
    shadow = {}
    for name, bits, subtract in ops:
        if subtract:
            if shadow.get(name, 0) >= bits:
                led.sub(name, bits)
                shadow[name] = shadow.get(name, 0) - bits
        else:
            led.add(name, bits)
            shadow[name] = shadow.get(name, 0) + bits
    assert led.total == sum(shadow.values())
    for name, bits in shadow.items():
        assert led.get(name) == bits


def test_arena_fresh_is_empty():
    assert ArenaModel().space_words() == 0


def test_arena_prefix_rule():
    a = ArenaModel()
    a.write(100, 7)
    assert a.space_words() == 101


def test_arena_blank_drops_high_water_mark():
    a = ArenaModel()
    a.write(3, 1)
    a.write(10, 2)
    a.blank(10)
    # oracle: rescan of every nonblank address
    assert a.space_words() == 4


def test_arena_random_workload_matches_scan():
    rng = SplitMix64(11)
    a = ArenaModel()
    shadow = {}
    for step in range(3000):
        addr = rng.randrange(200)
        if rng.randrange(3) == 0:
            a.blank(addr)
            shadow.pop(addr, None)
        else:
            word = rng.getrandbits(16)
            a.write(addr, word)
            if word == 0:
                shadow.pop(addr, None)
            else:
                shadow[addr] = word
        if step % 37 == 0:
            expect = 1 + max(shadow) if shadow else 0
            assert a.space_words() == expect


def test_pack_bits_crosses_words():
    words = pack_bits([(0x3, 2), (0xFFFFFFFFFFFFFFFF, 64), (1, 1)])
    assert len(words) == 2
    assert words[0] == (0xFFFFFFFFFFFFFFFF << 2 | 0x3) & ((1 << 64) - 1)


def test_pack_bits_rejects_overwide_values():
    with pytest.raises(ValueError):
        pack_bits([(4, 2)])


def _fill_some(structure, kind, universe, count, seed):
    rng = SplitMix64(seed)
    keys = set()
    while len(keys) < count:
        keys.add(rng.getrandbits(max(universe - 1, 1).bit_length()) % universe)
    for k in keys:
        if kind == "retrieval":
            structure.insert(k, rng.getrandbits(structure.payload_bits))
        else:
            structure.insert(k)


def _structures_under_audit():
    rng = SplitMix64(42)
    bd = BaseDict(key_bits=12, value_bits=6, capacity=50, rng=rng)
    for i in range(40):
        bd.insert(i * 19 % (1 << 12), i % 64)
    alloc = CodeAllocator(37)
    for _ in range(20):
        alloc.alloc()
    alloc.free_code(3)
    yield "base_dict", bd
    yield "allocator", alloc

    h = sample_qhf(QhfParams(1 << 16, 1 << 6, 1 << 10), SplitMix64(1))
    yield "qhf_narrow", h
    h = sample_qhf(QhfParams(1 << 16, 1 << 12, 1 << 10), SplitMix64(2))
    yield "qhf_wide", h

    d = MembPhDict(MembPhParams(1 << 8, 1 << 8, 1 << 30), SplitMix64(3))
    _fill_some(d, "memb", 1 << 30, 100, 5)
    yield "memb_brute", d
    d = MembPhDict(MembPhParams(1 << 16, 1 << 15, 1 << 17), SplitMix64(4))
    _fill_some(d, "memb", 1 << 17, 2000, 6)
    yield "memb_layered", d

    pod = PhOnlyDict(PhOnlyParams(1 << 8, 1 << 8, 1 << 16), SplitMix64(5))
    _fill_some(pod, "pod", 1 << 16, 100, 7)
    yield "pod_composed", pod
    pod = PhOnlyDict(PhOnlyParams(1 << 8, 0, 1 << 16), SplitMix64(6))
    _fill_some(pod, "pod", 1 << 16, 100, 8)
    yield "pod_relabel", pod

    rd = RetrievalDict(MembPhDict(MembPhParams(1 << 8, 0, 1 << 20), SplitMix64(7)), 8)
    _fill_some(rd, "retrieval", 1 << 20, 100, 9)
    yield "retrieval", rd


@pytest.mark.parametrize("name,structure",
                         list(_structures_under_audit()),
                         ids=lambda v: v if isinstance(v, str) else "")
def test_ledger_matches_serialized_layout(name, structure):
    """Declared bits match the flat serialized words, within one word per
    component, and the arena agrees on the total footprint."""
    led = (structure.space_ledger() if hasattr(structure, "space_ledger")
           else structure.describe_space())
    words = structure.serialize_components()
    assert set(words) == set(k for k, v in led.entries.items() if v or k in words), \
        f"{name}: component mismatch {set(led.entries) ^ set(words)}"
    arena = ArenaModel()
    addr = 0
    for comp, wlist in words.items():
        bits = led.get(comp)
        assert bits <= 64 * len(wlist) < bits + 64, \
            f"{name}/{comp}: {bits} bits vs {len(wlist)} words"
        for w in wlist:
            arena.write(addr, w)
            addr += 1
    arena.write(addr, addr + 1)  # nonblank terminator pins the prefix length
    assert arena.space_words() == addr + 1


def test_structure_totals_are_component_sums():
    for name, structure in _structures_under_audit():
        led = (structure.space_ledger() if hasattr(structure, "space_ledger")
               else structure.describe_space())
        assert led.total == sum(led.entries.values()), name
