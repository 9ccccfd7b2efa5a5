"""Randomized workload runner with an independent shadow model.

The shadow is deliberately boring: plain dicts and sets recording each
key's code (and payload) at insert time.  The runner drives a structure
and the shadow through the same operation stream and reports every
divergence in membership, code range, code distinctness, per-key
stability, or payload value.  It is both the verification oracle of the
test suite and the engine behind the `verify` CLI command.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import Tunables, ceil_lg
from .membdict import MembPhDict, MembPhParams
from .phdict import PhOnlyDict, PhOnlyParams
from .retrieval import RetrievalDict
from .rng import SplitMix64

__all__ = ["VerifyReport", "build_structure", "run_workload", "STRUCTURE_KINDS"]

STRUCTURE_KINDS = ("memb-ph", "ph-only", "retrieval-memb", "retrieval-ph", "qhf")

_MAX_REPORTED = 20


@dataclass
class VerifyReport:
    kind: str
    ops_run: int = 0
    inserts: int = 0
    deletes: int = 0
    probes: int = 0
    discrepancies: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def flag(self, msg: str) -> None:
        if len(self.discrepancies) < _MAX_REPORTED:
            self.discrepancies.append(msg)
        elif len(self.discrepancies) == _MAX_REPORTED:
            self.discrepancies.append("... further discrepancies suppressed")

    def summary(self) -> str:
        return (f"kind={self.kind} ops={self.ops_run} inserts={self.inserts} "
                f"deletes={self.deletes} probes={self.probes} "
                f"discrepancies={len(self.discrepancies)}")


def build_structure(kind: str, capacity: int, slack: int, universe: int,
                    seed: int, tunables: Tunables = Tunables(),
                    payload_bits: int = 8):
    """Construct the structure under test for a verify run."""
    rng = SplitMix64(seed)
    if kind == "memb-ph":
        return MembPhDict(MembPhParams(capacity, slack, universe, tunables), rng)
    if kind == "ph-only":
        return PhOnlyDict(PhOnlyParams(capacity, slack, universe, tunables), rng)
    if kind == "retrieval-memb":
        eng = MembPhDict(MembPhParams(capacity, slack, universe, tunables), rng)
        return RetrievalDict(eng, payload_bits)
    if kind == "retrieval-ph":
        eng = PhOnlyDict(PhOnlyParams(capacity, slack, universe, tunables), rng)
        return RetrievalDict(eng, payload_bits)
    raise ValueError(f"unknown structure kind {kind!r}")


def run_workload(kind: str, capacity: int, slack: int, universe: int,
                 ops: int, seed: int, tunables: Tunables = Tunables(),
                 payload_bits: int = 8, fault_at: int | None = None) -> VerifyReport:
    """Drive `ops` random operations against the structure and its shadow.

    `fault_at`, when set, corrupts the code recorded for the N-th insert;
    a healthy detector must then report a discrepancy (used to check that
    the oracle actually bites).
    """
    report = VerifyReport(kind=kind)
    if kind == "qhf":
        return _run_qhf(report, capacity, slack, universe, ops, seed, tunables)

    structure = build_structure(kind, capacity, slack, universe,
                                derive_structure_seed(seed), tunables, payload_bits)
    retrieval = kind.startswith("retrieval")
    membership = kind in ("memb-ph", "retrieval-memb")
    engine = structure.engine if retrieval else structure
    code_range = capacity + slack
    key_bits = ceil_lg(universe)
    rng = SplitMix64(seed)

    codes: dict[int, int] = {}       # key -> code recorded at insert
    payloads: dict[int, int] = {}
    owner: dict[int, int] = {}       # code -> key
    live_list: list[int] = []
    live_pos: dict[int, int] = {}

    def check_code(key, code, when):
        if not 0 <= code < code_range:
            report.flag(f"{when}: code {code} of key {key} outside [0, {code_range})")
        held = owner.get(code)
        if held is not None and held != key:
            report.flag(f"{when}: code {code} of key {key} already held by {held}")

    def current_code(key):
        if retrieval:
            return engine.hashcode(key)
        return structure.hashcode(key)

    for step in range(ops):
        if report.discrepancies:
            break    # the structure (or the detector test hook) is compromised
        report.ops_run += 1
        r = rng.randrange(100)
        can_insert = len(codes) < capacity
        if (r < 50 and can_insert) or not codes:
            key = rng.getrandbits(key_bits)
            while key in codes:
                key = rng.getrandbits(key_bits)
            if retrieval:
                payload = rng.getrandbits(payload_bits)
                code = structure.insert(key, payload)
                payloads[key] = payload
            else:
                code = structure.insert(key)
            report.inserts += 1
            if fault_at is not None and report.inserts == fault_at:
                code ^= 1
            check_code(key, code, f"insert#{report.inserts}")
            codes[key] = code
            owner[code] = key
            live_pos[key] = len(live_list)
            live_list.append(key)
        elif r < 80 and codes:
            key = live_list[rng.randrange(len(live_list))]
            structure.delete(key)
            report.deletes += 1
            del owner[codes[key]]
            del codes[key]
            payloads.pop(key, None)
            pos = live_pos.pop(key)
            last = live_list.pop()
            if last != key:
                live_list[pos] = last
                live_pos[last] = pos
            if membership and (engine.member(key) if retrieval else structure.member(key)):
                report.flag(f"delete: key {key} still a member")
        else:
            report.probes += 1
            if codes:
                key = live_list[rng.randrange(len(live_list))]
                code = current_code(key)
                if code != codes[key]:
                    report.flag(f"probe: key {key} code {code} != recorded {codes[key]}")
                if retrieval:
                    if rng.randrange(4) == 0:
                        newp = rng.getrandbits(payload_bits)
                        structure.update(key, newp)
                        payloads[key] = newp
                        if engine.hashcode(key) != codes[key]:
                            report.flag(f"update moved key {key}")
                    got = structure.retrieve(key)
                    if got != payloads[key]:
                        report.flag(f"probe: key {key} payload {got} != {payloads[key]}")
            if membership:
                probe = rng.getrandbits(key_bits)
                expect = probe in codes
                got = engine.member(probe) if retrieval else structure.member(probe)
                if got != expect:
                    report.flag(f"probe: member({probe}) = {got}, shadow says {expect}")
            elif codes:
                # hashing-only: a non-resident query must stay in range and
                # must not disturb the structure.
                probe = rng.getrandbits(key_bits)
                if probe not in codes:
                    eng = engine if retrieval else structure
                    val = eng.hashcode(probe)
                    if not 0 <= val < code_range:
                        report.flag(f"non-resident hashcode {val} outside range")

    # Final sweep: every resident key answers correctly.
    if report.discrepancies:
        return report
    for key, code in codes.items():
        if current_code(key) != code:
            report.flag(f"sweep: key {key} code drifted")
        if membership:
            ok = engine.member(key) if retrieval else structure.member(key)
            if not ok:
                report.flag(f"sweep: key {key} lost membership")
        if retrieval and structure.retrieve(key) != payloads[key]:
            report.flag(f"sweep: key {key} payload mismatch")
    return report


def derive_structure_seed(seed: int) -> int:
    # Structure and workload draw from distinct streams of the same seed.
    return SplitMix64(seed ^ 0xA5A5A5A5A5A5A5A5).next_u64()


def _run_qhf(report: VerifyReport, capacity: int, slack: int, universe: int,
             ops: int, seed: int, tunables: Tunables) -> VerifyReport:
    """Round-trip and census checks for the hash family itself."""
    import numpy as np

    from .qhf import QhfParams, sample_qhf

    buckets = max(1, slack)  # the slack flag doubles as the bucket count here
    params = QhfParams(universe, buckets, capacity,
                       alpha=tunables.alpha, delta=tunables.delta,
                       debug_identity=tunables.debug_identity)
    h = sample_qhf(params, SplitMix64(derive_structure_seed(seed)))
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    n_probe = min(ops, universe) if ops else 0
    if n_probe:
        xs = rng.integers(0, universe, size=n_probe, dtype=np.uint64)
        bs, qs = h.eval_batch(xs)
        report.ops_run = int(n_probe)
        report.probes = int(n_probe)
        if int(bs.max(initial=0)) >= buckets:
            report.flag("bucket out of range")
        if int(qs.max(initial=0)) >= universe // buckets:
            report.flag("quotient out of range")
        back = h.invert_batch(bs, qs)
        bad = int((back != xs).sum())
        if bad:
            report.flag(f"{bad} round-trip failures")
        # Census versus a naive two-pass recount.
        sample = np.unique(xs[: min(capacity, n_probe)])
        census = h.collision_census(sample, 2)
        loads: dict[int, int] = {}
        for x in sample.tolist():
            b = h.eval(int(x))[0]
            loads[b] = loads.get(b, 0) + 1
        naive = sum(c for c in loads.values() if c >= 2)
        if census.count != naive:
            report.flag(f"census {census.count} != naive recount {naive}")
    return report
