"""Quotient hash functions: representable bijections [u] -> [b] x [u/b].

The first output is a bucket, the second a quotient; together they identify
the key exactly, so a structure that knows the bucket only needs to store
the quotient.  The sampled family keeps bucket loads concentrated for any
fixed key set while staying invertible in constant time, using four stages:

1. universe reduction: a wide affine permutation of [u]; only the top
   `reduced_bits` survive into the grid, the rest rides along in the
   quotient untouched,
2. row shifts: the reduced domain is viewed as a grid of `columns` columns;
   each row is circularly shifted by a keyed per-row amount,
3. column permutations: an independent affine permutation of the rows
   inside each column,
4. group permutations (only when buckets < max_keys): columns are grouped
   and the sub-column blocks of each group pass through one explicitly
   stored random permutation.

Bit layout convention, pinned by the identity mode: with every randomized
stage disabled, eval(x) = (x div (u/b), x mod (u/b)).  All splits are
bit-field extractions, so every fractional-power count is rounded up to a
power of two.

Instances are immutable after sampling; eval/invert are thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gf2 import MODULUS, gf_double
from .perm import AffinePerm, ShiftFamily, StoredPerm, sample_affine, sample_stored
from .rng import SplitMix64
from .spacemeter import SpaceLedger, pack_bits

__all__ = ["QhfParams", "QuotientHashFn", "CollisionCensus", "sample_qhf"]

_U64 = np.uint64
_MASK64 = _U64(0xFFFFFFFFFFFFFFFF)

# Below this many keys the fractional-power grid degenerates; a single
# affine permutation already meets the bounds because the slack term
# exceeds the key count.
SMALL_KEY_CUTOFF = 256

# Universe reduction keeps reduced_exponent * lg(max_keys) bits, making the
# chance of any collision among reduced values about n^(2 - exponent).
REDUCED_EXPONENT = 6


def _ceil_lg(v: int) -> int:
    return max(v - 1, 0).bit_length()


@dataclass(frozen=True)
class QhfParams:
    """Sampling parameters; universe and buckets must be powers of two."""

    universe: int
    buckets: int
    max_keys: int
    alpha: float = 0.95
    delta: float = 0.5
    debug_identity: bool = False

    def __post_init__(self):
        u, b, n = self.universe, self.buckets, self.max_keys
        if u <= 0 or u & (u - 1):
            raise ValueError("universe must be a power of two")
        if b <= 0 or b & (b - 1):
            raise ValueError("buckets must be a power of two")
        if b > u:
            raise ValueError("more buckets than universe elements")
        if not 1 <= n <= u:
            raise ValueError("max_keys must be in [1, universe]")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")

    @property
    def wide(self) -> bool:
        """True in the buckets >= max_keys regime (no group permutations)."""
        return self.buckets >= self.max_keys


@dataclass
class CollisionCensus:
    """Count of keys living in buckets loaded to at least `threshold`."""

    threshold: int
    count: int
    bucket_loads: dict[int, int] | None = field(default=None)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def _gf_mul_vec(a: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """Elementwise GF(2^k) product of two uint64 arrays."""
    m = _U64(MODULUS[k] & 0xFFFFFFFFFFFFFFFF)
    acc = np.zeros_like(a)
    cur = a.copy()
    for i in range(k):
        mask = _U64(0) - ((x >> _U64(i)) & _U64(1))
        acc ^= cur & mask
        if k < 64:
            carry = _U64(0) - ((cur >> _U64(k - 1)) & _U64(1))
            cur = ((cur << _U64(1)) ^ (m & carry)) & ((_U64(1) << _U64(k)) - _U64(1))
        else:
            carry = _U64(0) - (cur >> _U64(63))
            cur = (cur << _U64(1)) ^ (m & carry)
    return acc


def _gf_inv_vec(a: np.ndarray, k: int) -> np.ndarray:
    """Elementwise inverse of nonzero elements: a^(2^k - 2) by square-and-multiply."""
    e = (1 << k) - 2
    result = np.ones_like(a)
    base = a.copy()
    while e:
        if e & 1:
            result = _gf_mul_vec(result, base, k)
        e >>= 1
        if e:
            base = _gf_mul_vec(base, base, k)
    return result


def _doubling_table(a: np.ndarray, k: int) -> np.ndarray:
    """tbl[:, i] = a * x^i in GF(2^k); drives both scalar and batch multiply."""
    m = _U64(MODULUS[k] & 0xFFFFFFFFFFFFFFFF)
    tbl = np.zeros((len(a), k), dtype=_U64)
    tbl[:, 0] = a
    for i in range(1, k):
        cur = tbl[:, i - 1]
        if k < 64:
            carry = _U64(0) - ((cur >> _U64(k - 1)) & _U64(1))
            tbl[:, i] = ((cur << _U64(1)) ^ (m & carry)) & ((_U64(1) << _U64(k)) - _U64(1))
        else:
            carry = _U64(0) - (cur >> _U64(63))
            tbl[:, i] = (cur << _U64(1)) ^ (m & carry)
    return tbl


def _affine_bitprods(perm: AffinePerm) -> list[int]:
    prods = [perm.a]
    for _ in range(1, perm.k):
        prods.append(gf_double(prods[-1], perm.k))
    return prods


def _affine_apply_batch(xs: np.ndarray, bitprods: list[int], offset: int, k: int) -> np.ndarray:
    acc = np.zeros_like(xs)
    for i, p in enumerate(bitprods):
        mask = _U64(0) - ((xs >> _U64(i)) & _U64(1))
        acc ^= _U64(p) & mask
    return acc ^ _U64(offset)


class QuotientHashFn:
    """A sampled bijection [u] -> [b] x [u/b].  Build with :func:`sample_qhf`."""

    def __init__(self, params: QhfParams, rng: SplitMix64):
        self.params = params
        u, b, n = params.universe, params.buckets, params.max_keys
        self.lu = _ceil_lg(u)
        self.lb = _ceil_lg(b)
        self.lq = self.lu - self.lb

        identity = params.debug_identity
        self._path = "grid"
        if identity or b == 1:
            self._path = "trivial"
        elif n < SMALL_KEY_CUTOFF:
            self._path = "small"

        self.reduce: AffinePerm | None = None
        self.shifts: ShiftFamily | None = None
        self.reduced_bits = self.lu
        self.columns = 1
        self.group_count = 0
        self.group_size = 0
        self._col_a = None

        if self._path == "small":
            self.reduce = sample_affine(self.lu, rng)
            self._t1_prods = _affine_bitprods(self.reduce)
        elif self._path == "grid":
            self._build_grid(rng)

    # -- construction ---------------------------------------------------

    def _build_grid(self, rng: SplitMix64) -> None:
        u, b, n = self.params.universe, self.params.buckets, self.params.max_keys
        lgn = _ceil_lg(n)
        self.reduced_bits = min(self.lu, max(REDUCED_EXPONENT * lgn, self.lb))
        self.excess_bits = self.lu - self.reduced_bits

        lc = min(-(-3 * lgn // 4), self.reduced_bits)   # ceil(0.75 lg n) columns
        self.columns = 1 << lc
        self.lc = lc
        self.k_row = self.reduced_bits - lc

        # Stage 1: universe reduction.
        self.reduce = sample_affine(self.lu, rng)
        self._t1_prods = _affine_bitprods(self.reduce)

        # Stage 2: per-row shifts.
        seed = (rng.next_u64() << 64) | rng.next_u64()
        self.shifts = ShiftFamily(seed, self.columns, self.k_row)

        # Stage 3: one affine permutation of the rows per column.
        if self.k_row > 0:
            k = self.k_row
            col_a = np.empty(self.columns, dtype=_U64)
            col_b = np.empty(self.columns, dtype=_U64)
            for j in range(self.columns):
                a = 0
                while a == 0:
                    a = rng.getrandbits(k)
                col_a[j] = a
                col_b[j] = rng.getrandbits(k)
            self._col_a, self._col_b = col_a, col_b
            self._col_dbl = _doubling_table(col_a, k)
            col_ainv = _gf_inv_vec(col_a, k)
            self._col_inv_dbl = _doubling_table(col_ainv, k)
            self._col_dbl_l = self._col_dbl.tolist()
            self._col_inv_dbl_l = self._col_inv_dbl.tolist()
            self._col_b_l = col_b.tolist()

        # Stage 4: stored permutations of sub-column blocks (narrow regime).
        self.sub_bits = 0
        self._groups: list[StoredPerm] = []
        if not self.params.wide:
            self.sub_bits = min(-(-lgn // 2), self.k_row)    # ceil(lg sqrt(n))
            self.group_size = 1 << self.sub_bits
            gc = min(1 << -(-lgn // 4), self.columns)        # ceil(lg n^(1/4))
            self.group_count = gc
            if self.sub_bits > 0:
                self._groups = [sample_stored(self.group_size, rng) for _ in range(gc)]
                self._grp_fwd = np.array([g.forward for g in self._groups], dtype=_U64)
                self._grp_inv = np.array([g.inverse for g in self._groups], dtype=_U64)
                self._grp_fwd_l = self._grp_fwd.tolist()
                self._grp_inv_l = self._grp_inv.tolist()
            else:
                self.group_count = 0

    # -- scalar evaluation ----------------------------------------------

    def eval(self, x: int) -> tuple[int, int]:
        """Map a key to its (bucket, quotient) pair."""
        if not 0 <= x < self.params.universe:
            raise ValueError("key outside universe")
        if self._path == "trivial":
            return x >> self.lq, x & ((1 << self.lq) - 1)
        if self._path == "small":
            y = self.reduce.apply(x)
            return y >> self.lq, y & ((1 << self.lq) - 1)

        y = self.reduce.apply(x)
        excess = y & ((1 << self.excess_bits) - 1)
        z = y >> self.excess_bits
        row = z & ((1 << self.k_row) - 1)
        col = (z >> self.k_row) + self.shifts.shift_of_row(row)
        col &= self.columns - 1
        if self.k_row > 0:
            dbl = self._col_dbl_l[col]
            r = self._col_b_l[col]
            t, i = row, 0
            while t:
                if t & 1:
                    r ^= dbl[i]
                t >>= 1
                i += 1
            row = r
        if self.group_count:
            pos_bits = self.k_row - self.sub_bits
            sub = self._grp_fwd_l[col & (self.group_count - 1)][row >> pos_bits]
            row = (sub << pos_bits) | (row & ((1 << pos_bits) - 1))
        w = (col << self.k_row) | row
        qz = w & ((1 << (self.reduced_bits - self.lb)) - 1)
        return w >> (self.reduced_bits - self.lb), (qz << self.excess_bits) | excess

    def invert(self, bucket: int, quotient: int) -> int:
        """Exact preimage of a (bucket, quotient) pair."""
        if not 0 <= bucket < self.params.buckets:
            raise ValueError("bucket out of range")
        if not 0 <= quotient < (1 << self.lq):
            raise ValueError("quotient out of range")
        if self._path == "trivial":
            return (bucket << self.lq) | quotient
        if self._path == "small":
            return self.reduce.invert((bucket << self.lq) | quotient)

        excess = quotient & ((1 << self.excess_bits) - 1)
        qz = quotient >> self.excess_bits
        w = (bucket << (self.reduced_bits - self.lb)) | qz
        row = w & ((1 << self.k_row) - 1)
        col = w >> self.k_row
        if self.group_count:
            pos_bits = self.k_row - self.sub_bits
            sub = self._grp_inv_l[col & (self.group_count - 1)][row >> pos_bits]
            row = (sub << pos_bits) | (row & ((1 << pos_bits) - 1))
        if self.k_row > 0:
            dbl = self._col_inv_dbl_l[col]
            t, i, r = row ^ self._col_b_l[col], 0, 0
            while t:
                if t & 1:
                    r ^= dbl[i]
                t >>= 1
                i += 1
            row = r
        col = (col - self.shifts.shift_of_row(row)) & (self.columns - 1)
        z = (col << self.k_row) | row
        return self.reduce.invert((z << self.excess_bits) | excess)

    # -- batch evaluation -------------------------------------------------

    def eval_batch(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized eval; xs is a uint64 array of keys."""
        xs = np.asarray(xs, dtype=_U64)
        if self._path == "trivial":
            if self.lq >= 64:
                return np.zeros_like(xs), xs
            return xs >> _U64(self.lq), xs & _U64((1 << self.lq) - 1)
        if self._path == "small":
            y = _affine_apply_batch(xs, self._t1_prods, self.reduce.b, self.lu)
            return y >> _U64(self.lq), y & _U64((1 << self.lq) - 1)

        y = _affine_apply_batch(xs, self._t1_prods, self.reduce.b, self.lu)
        excess = y & _U64((1 << self.excess_bits) - 1)
        z = y >> _U64(self.excess_bits)
        row = z & _U64((1 << self.k_row) - 1)
        col = (z >> _U64(self.k_row)) + self._shift_batch(row)
        col &= _U64(self.columns - 1)
        if self.k_row > 0:
            acc = np.zeros_like(row)
            dbl = self._col_dbl
            ci = col.astype(np.int64)
            for i in range(self.k_row):
                mask = _U64(0) - ((row >> _U64(i)) & _U64(1))
                acc ^= dbl[ci, i] & mask
            row = acc ^ self._col_b[ci]
        if self.group_count:
            pos_bits = self.k_row - self.sub_bits
            gi = (col & _U64(self.group_count - 1)).astype(np.int64)
            sub = self._grp_fwd[gi, (row >> _U64(pos_bits)).astype(np.int64)]
            row = (sub << _U64(pos_bits)) | (row & _U64((1 << pos_bits) - 1))
        w = (col << _U64(self.k_row)) | row
        qz = w & _U64((1 << (self.reduced_bits - self.lb)) - 1)
        quot = (qz << _U64(self.excess_bits)) | excess
        return w >> _U64(self.reduced_bits - self.lb), quot

    def invert_batch(self, buckets: np.ndarray, quots: np.ndarray) -> np.ndarray:
        buckets = np.asarray(buckets, dtype=_U64)
        quots = np.asarray(quots, dtype=_U64)
        if self._path == "trivial":
            if self.lq >= 64:
                return quots.copy()
            return (buckets << _U64(self.lq)) | quots
        if self._path == "small":
            y = (buckets << _U64(self.lq)) | quots
            return _affine_apply_batch(y ^ _U64(self.reduce.b), self._t1_inv_prods(), 0, self.lu)

        excess = quots & _U64((1 << self.excess_bits) - 1)
        qz = quots >> _U64(self.excess_bits)
        w = (buckets << _U64(self.reduced_bits - self.lb)) | qz
        row = w & _U64((1 << self.k_row) - 1)
        col = w >> _U64(self.k_row)
        if self.group_count:
            pos_bits = self.k_row - self.sub_bits
            gi = (col & _U64(self.group_count - 1)).astype(np.int64)
            sub = self._grp_inv[gi, (row >> _U64(pos_bits)).astype(np.int64)]
            row = (sub << _U64(pos_bits)) | (row & _U64((1 << pos_bits) - 1))
        if self.k_row > 0:
            ci = col.astype(np.int64)
            acc = np.zeros_like(row)
            t = row ^ self._col_b[ci]
            dbl = self._col_inv_dbl
            for i in range(self.k_row):
                mask = _U64(0) - ((t >> _U64(i)) & _U64(1))
                acc ^= dbl[ci, i] & mask
            row = acc
        col = (col - self._shift_batch(row)) & _U64(self.columns - 1)
        z = (col << _U64(self.k_row)) | row
        y = (z << _U64(self.excess_bits)) | excess
        return _affine_apply_batch(y ^ _U64(self.reduce.b), self._t1_inv_prods(), 0, self.lu)

    def _t1_inv_prods(self) -> list[int]:
        if not hasattr(self, "_t1_inv_cache"):
            from .gf2 import gf_inv
            inv = gf_inv(self.reduce.a, self.lu)
            prods = [inv]
            for _ in range(1, self.lu):
                prods.append(gf_double(prods[-1], self.lu))
            self._t1_inv_cache = prods
        return self._t1_inv_cache

    def _shift_batch(self, rows: np.ndarray) -> np.ndarray:
        if self.columns == 1:
            return np.zeros_like(rows)
        h = _mix64_np(rows ^ _U64(self.shifts.seed_lo))
        h = _mix64_np(h + _U64(self.shifts.seed_hi))
        return h >> _U64(64 - self.lc)

    # -- measurement ------------------------------------------------------

    def collision_census(self, keys, threshold: int, with_histogram: bool = False) -> CollisionCensus:
        """Exact count of keys whose bucket holds >= threshold of `keys`."""
        keys = np.asarray(list(keys) if not isinstance(keys, np.ndarray) else keys, dtype=_U64)
        if len(keys) > self.params.max_keys:
            raise ValueError("key set larger than the sampled bound")
        if len(keys) == 0:
            return CollisionCensus(threshold, 0, {} if with_histogram else None)
        buckets, _ = self.eval_batch(keys)
        _, counts = np.unique(buckets, return_counts=True)
        total = int(counts[counts >= threshold].sum())
        hist = None
        if with_histogram:
            loads, freq = np.unique(counts, return_counts=True)
            hist = {int(l): int(f) for l, f in zip(loads, freq)}
        return CollisionCensus(threshold, total, hist)

    def overflow_trace(self, workload, capacity: int) -> int:
        """Replay inserts/deletes; count live keys whose latest insertion
        landed in a bucket already holding >= `capacity` live keys.

        Each insertion is judged independently against the loads at that
        moment; deleting a key discards its flag.  Raises on a delete of an
        absent key or an insert of a live one.
        """
        ops = list(workload)
        if not ops:
            return 0
        keys = np.fromiter((k for _, k in ops), dtype=_U64, count=len(ops))
        uniq, inv = np.unique(keys, return_inverse=True)
        ubuckets, _ = self.eval_batch(uniq)
        ubuckets = ubuckets.tolist()
        loads: dict[int, int] = {}
        flagged: dict[int, bool] = {}
        live = 0
        for (op, key), ui in zip(ops, inv.tolist()):
            bkt = ubuckets[ui]
            if op == "i":
                if key in flagged:
                    raise ValueError(f"insert of live key {key}")
                cur = loads.get(bkt, 0)
                flagged[key] = cur >= capacity
                loads[bkt] = cur + 1
                live += 1
                if live > self.params.max_keys:
                    raise ValueError("workload exceeds the live-size bound")
            elif op == "d":
                if key not in flagged:
                    raise ValueError(f"delete of absent key {key}")
                del flagged[key]
                loads[bkt] -= 1
                live -= 1
            else:
                raise ValueError(f"unknown op {op!r}")
        return sum(1 for f in flagged.values() if f)

    def describe_space(self) -> SpaceLedger:
        """Exact bits of all stored tables and seeds."""
        led = SpaceLedger()
        led.add("params", 5 * 64)
        if self._path == "trivial":
            return led
        led.add("reduce_perm", self.reduce.space_bits())
        if self._path == "small":
            return led
        led.add("shift_seed", self.shifts.space_bits())
        if self.k_row > 0:
            led.add("column_perms", self.columns * 2 * self.k_row)
        if self._groups:
            led.add("group_perms", sum(g.space_bits() for g in self._groups))
        return led

    def serialize_components(self) -> dict[str, list[int]]:
        """Flat word layout per component, for accounting-honesty checks."""
        out = {"params": pack_bits([(self.params.universe, 64), (self.params.buckets, 64),
                                    (self.params.max_keys, 64), (1, 64), (1, 64)])}
        if self._path == "trivial":
            return out
        out["reduce_perm"] = pack_bits([(self.reduce.a, self.lu), (self.reduce.b, self.lu)])
        if self._path == "small":
            return out
        out["shift_seed"] = pack_bits([(self.shifts.seed_lo, 64), (self.shifts.seed_hi, 64)])
        if self.k_row > 0:
            fields = []
            for j in range(self.columns):
                fields.append((int(self._col_a[j]), self.k_row))
                fields.append((int(self._col_b[j]), self.k_row))
            out["column_perms"] = pack_bits(fields)
        if self._groups:
            fields = []
            w = max(self.group_size - 1, 0).bit_length()
            for g in self._groups:
                for v in g.forward:
                    fields.append((v, w))
                for v in g.inverse:
                    fields.append((v, w))
            out["group_perms"] = pack_bits(fields)
        return out


def sample_qhf(params: QhfParams, rng: SplitMix64) -> QuotientHashFn:
    """Sample a quotient hash function; all randomness drawn from `rng`."""
    return QuotientHashFn(params, rng)
