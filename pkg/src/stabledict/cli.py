"""Measurement command line.

Three subcommands:

* verify     -- run a random workload against a structure and its shadow
                model; exit 1 on any discrepancy.
* collisions -- per-trial bucket-overflow censuses of sampled hash
                functions, as CSV, next to their theoretical bounds.
* space      -- exact space of structures over a (universe, slack) grid,
                as CSV, next to the model terms they should track.

Sizes accept `2^k` notation.  All commands are bit-reproducible for a fixed
--seed: trial i draws from a stream derived by the documented split rule in
rng.derive_seed.  CSV is comma-separated, header row, numeric fields
unquoted, newline-terminated.  --out writes to a file (relative paths land
in $STABLEDICT_OUT when set); otherwise rows go to stdout.

Exit codes: 0 success, 1 verification discrepancy, 2 configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .config import Tunables, paper_lg
from .qhf import QhfParams, sample_qhf
from .rng import SplitMix64, derive_seed
from .workload import STRUCTURE_KINDS, build_structure, run_workload

OUT_DIR_ENV = "STABLEDICT_OUT"

_TUNABLE_FIELDS = {"c", "c1", "c2", "c4", "c5", "alpha", "delta", "debug_identity"}


def parse_size(text: str) -> int:
    """Positive integer, plain or in 2^k notation."""
    text = text.strip()
    if text.startswith("2^"):
        return 1 << int(text[2:])
    v = int(text)
    if v < 0:
        raise ValueError(f"sizes are nonnegative: {text!r}")
    return v


def parse_size_list(text: str) -> list[int]:
    return [parse_size(part) for part in text.split(",") if part]


def parse_tunables(pairs: list[str]) -> Tunables:
    overrides = {}
    for pair in pairs:
        key, _, value = pair.partition("=")
        key = key.strip()
        if key not in _TUNABLE_FIELDS:
            raise ValueError(f"unknown tunable {key!r}")
        if key == "debug_identity":
            overrides[key] = bool(int(value))
        else:
            overrides[key] = float(value)
    return Tunables().replace(**overrides)


def _open_out(path: str | None):
    if path is None:
        return sys.stdout, False
    base = os.environ.get(OUT_DIR_ENV)
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    return open(path, "w"), True


def cmd_verify(args) -> int:
    tunables = parse_tunables(args.set)
    fault = args.inject_fault if args.inject_fault else None
    report = run_workload(args.kind, args.n, args.b if args.kind == "qhf" else args.t,
                          args.u, args.ops, args.seed, tunables,
                          fault_at=fault)
    print(f"verify {report.summary()}")
    for msg in report.discrepancies:
        print(f"  DISCREPANCY: {msg}")
    return 0 if report.ok else 1


def cmd_collisions(args) -> int:
    if args.kind != "qhf":
        raise ValueError("collisions requires --kind qhf")
    tunables = parse_tunables(args.set)
    n, u, b = args.n, args.u, args.b
    alpha, delta = tunables.alpha, tunables.delta
    bound2 = 2 * n * n / b + n ** alpha
    tau_hi = int((1 + delta) * n / b) + 1
    bound_hi = 2 * n * math.exp(-delta * delta * n / (3 * b)) + n ** alpha
    out, close = _open_out(args.out)
    try:
        out.write("trial,seed,n,u,b,tau,count,bound\n")
        for trial in range(args.trials):
            seed = derive_seed(args.seed, trial)
            h = sample_qhf(QhfParams(u, b, n, alpha=alpha, delta=delta,
                                     debug_identity=tunables.debug_identity),
                           SplitMix64(seed))
            if args.adversarial:
                keys = np.arange(n, dtype=np.uint64)
            else:
                keys = _sample_keys(np.random.default_rng(seed), u, n)
            for tau, bound in ((2, bound2), (tau_hi, bound_hi)):
                count = h.collision_census(keys, tau).count
                out.write(f"{trial},{seed},{n},{u},{b},{tau},{count},{bound:.6f}\n")
    finally:
        if close:
            out.close()
    return 0


def cmd_space(args) -> int:
    tunables = parse_tunables(args.set)
    if args.kind == "qhf":
        raise ValueError("space requires a dictionary kind")
    n = args.n
    payload_bits = args.r
    out, close = _open_out(args.out)
    try:
        out.write("kind,u,t,n,bits,bits_per_key,lg_u_over_n,lg_lg_u_over_n,"
                  "lg_n_over_t1,r\n")
        grid_index = 0
        for u in args.u:
            for t in args.t:
                seed = derive_seed(args.seed, grid_index)
                grid_index += 1
                structure = build_structure(args.kind, n, t, u, seed, tunables,
                                            payload_bits)
                rng = np.random.default_rng(seed)
                keys = _sample_keys(rng, u, n)
                for key in keys.tolist():
                    if args.kind.startswith("retrieval"):
                        structure.insert(int(key), int(rng.integers(0, 1 << payload_bits))
                                         if payload_bits else 0)
                    else:
                        structure.insert(int(key))
                bits = structure.space_bits()
                r = payload_bits if args.kind.startswith("retrieval") else 0
                out.write(f"{args.kind},{u},{t},{n},{bits},{bits / n:.4f},"
                          f"{paper_lg(u / n):.6f},{paper_lg(paper_lg(u / n)):.6f},"
                          f"{paper_lg(n / (t + 1)):.6f},{r}\n")
    finally:
        if close:
            out.close()
    return 0


def _sample_keys(rng: np.random.Generator, universe: int, count: int) -> np.ndarray:
    """`count` distinct keys from [universe]."""
    if universe <= 1 << 24:
        return rng.choice(universe, size=count, replace=False).astype(np.uint64)
    seen = np.unique(rng.integers(0, universe, size=2 * count, dtype=np.uint64))
    while len(seen) < count:
        more = rng.integers(0, universe, size=count, dtype=np.uint64)
        seen = np.unique(np.concatenate([seen, more]))
    rng.shuffle(seen)
    return seen[:count]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabledict",
        description="workload verification and measurement for the dictionary structures")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid=False):
        size = parse_size_list if grid else parse_size
        p.add_argument("--n", type=parse_size, required=True, help="capacity (2^k ok)")
        p.add_argument("--t", type=size, default=[0] if grid else 0,
                       help="hashcode slack" + (", comma list ok" if grid else ""))
        p.add_argument("--u", type=size, help="universe size"
                       + (", comma list ok" if grid else ""))
        p.add_argument("--b", type=parse_size, default=0,
                       help="bucket count (qhf kind only)")
        p.add_argument("--kind", choices=STRUCTURE_KINDS, default="memb-ph")
        p.add_argument("--seed", type=parse_size, default=1)
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--ops", type=int, default=10000)
        p.add_argument("--out", default=None,
                       help=f"output path (relative to ${OUT_DIR_ENV} when set)")
        p.add_argument("--set", action="append", default=[], metavar="TUNABLE=VALUE",
                       help="override c, c1, c2, c4, c5, alpha, delta, debug_identity")
        p.add_argument("--r", type=int, default=8, help="payload bits (retrieval kinds)")

    pv = sub.add_parser("verify", help="shadow-model workload verification")
    common(pv)
    pv.add_argument("--inject-fault", type=int, default=0, help=argparse.SUPPRESS)
    pv.set_defaults(func=cmd_verify)

    pc = sub.add_parser("collisions", help="bucket-overflow census trials (CSV)")
    common(pc)
    pc.add_argument("--adversarial", action="store_true",
                    help="use the contiguous key set 0..n-1 instead of a random one")
    pc.set_defaults(func=cmd_collisions)

    ps = sub.add_parser("space", help="space scaling over a (u, t) grid (CSV)")
    common(ps, grid=True)
    ps.set_defaults(func=cmd_space)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.u is None:
            raise ValueError("--u is required")
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
