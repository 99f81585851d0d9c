"""Command-line front end: ``ciaosim gen ...`` and ``ciaosim run ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import ConfigError, Policy, default_config, load_config
from .engine import SimStats, run_matrix, write_reports
from .workloads import (PRESETS, Infeasible, InvalidRatio, ParseError, footprint_bytes,
                        gen_class, gen_thrash, read_trace, write_trace)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_TRACE = 3
EXIT_BAD_POLICY = 4
EXIT_BAD_CONFIG = 5
EXIT_BAD_TRACE = 6
EXIT_RUN_FAILED = 7

ALL_POLICIES = ",".join(p.value for p in Policy)


def _size(text: str) -> int:
    """Byte count with optional K/M/G suffix (binary multiples)."""
    t = text.strip().upper().removesuffix("B")
    mult = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}.get(t[-1:], 1)
    if mult > 1:
        t = t[:-1]
    try:
        return int(float(t) * mult)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ciaosim",
        description="Single-SM GPU cache interference simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic trace")
    gsub = gen.add_subparsers(dest="generator", required=True)

    th = gsub.add_parser("thrash", help="warps whose blocks collide in L1D sets")
    th.add_argument("--warps", type=int, default=2)
    th.add_argument("--sets", type=int, default=1, dest="sets_touched")
    th.add_argument("--reuse", type=int, default=64)
    th.add_argument("--seed", type=int, default=0)
    th.add_argument("--config", type=Path)
    th.add_argument("-o", "--out", type=Path, required=True)

    cl = gsub.add_parser("class", help="LWS / SWS / CI workload preset")
    cl.add_argument("--class", dest="cls", required=True, choices=sorted(PRESETS),
                    type=str.upper)
    cl.add_argument("--warps", type=int)
    cl.add_argument("--footprint", type=_size, help="bytes, e.g. 24K or 4M")
    cl.add_argument("--alu-ratio", type=float)
    cl.add_argument("--seed", type=int, default=0)
    cl.add_argument("-o", "--out", type=Path, required=True)

    r = sub.add_parser("run", help="simulate a trace under one or more policies")
    r.add_argument("--trace", type=Path, required=True)
    r.add_argument("--config", type=Path)
    r.add_argument("--policy", default="gto",
                   help=f"comma-separated list from {ALL_POLICIES}")
    r.add_argument("--out", type=Path, default=Path("results"))
    r.add_argument("--seed", type=int)
    r.add_argument("--debug-coherence", action="store_true",
                   help="check L1D/shared-memory exclusivity every cycle")
    r.add_argument("--best-swl-limit", type=int, metavar="N")
    return ap


def cmd_gen(args) -> int:
    if args.generator == "thrash":
        cfg = load_config(args.config) if args.config else default_config()
        trace = gen_thrash(args.warps, args.sets_touched, args.reuse, args.seed, cfg)
    else:
        trace = gen_class(args.cls, args.warps, args.footprint, args.alu_ratio, args.seed)
    write_trace(trace, args.out)
    print(f"wrote {args.out}: {len(trace)} records, "
          f"footprint {footprint_bytes(trace)} bytes")
    return EXIT_OK


def _ratio(x: float, base: float) -> str:
    return f"{x / base:.3f}" if base else "n/a"


def format_table(results: Sequence[SimStats], baseline: Optional[SimStats]) -> str:
    head = f"{'policy':<10} {'ipc':>8} {'ipc/gto':>8} {'l1d_hit':>8} {'smem_hit':>8} " \
           f"{'hit':>8} {'hit/gto':>8}"
    lines = [head, "-" * len(head)]
    for s in results:
        b_ipc = baseline.ipc if baseline else 0.0
        b_hit = baseline.combined_hit_rate if baseline else 0.0
        lines.append(f"{s.policy:<10} {s.ipc:>8.4f} {_ratio(s.ipc, b_ipc):>8} "
                     f"{s.l1d_hit_rate:>8.4f} {s.smem_hit_rate:>8.4f} "
                     f"{s.combined_hit_rate:>8.4f} {_ratio(s.combined_hit_rate, b_hit):>8}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    if not args.trace.is_file():
        print(f"error: trace not found: {args.trace}", file=sys.stderr)
        return EXIT_NO_TRACE
    try:
        policies: List[Policy] = [Policy.parse(p) for p in args.policy.split(",") if p.strip()]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_POLICY
    if not policies:
        print("error: no policy given", file=sys.stderr)
        return EXIT_BAD_POLICY
    try:
        base = load_config(args.config) if args.config else default_config()
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.best_swl_limit is not None:
            overrides["best_swl_limit"] = args.best_swl_limit
        cfgs = [base.replace(scheduler=p, **overrides) for p in policies]
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        trace = read_trace(args.trace)
    except ParseError as exc:
        print(f"error: {args.trace}: {exc}", file=sys.stderr)
        return EXIT_BAD_TRACE

    need_baseline = Policy.GTO not in policies
    cells = cfgs + ([base.replace(scheduler=Policy.GTO, **overrides)] if need_baseline else [])
    outcomes = run_matrix({args.trace.stem: trace}, cells,
                          debug_coherence=args.debug_coherence)
    extra = outcomes.pop() if need_baseline else None
    ok = [r for r in outcomes if isinstance(r, SimStats)]
    failed = [(c, r) for c, r in zip(cfgs, outcomes) if not isinstance(r, SimStats)]
    if need_baseline:
        baseline = extra if isinstance(extra, SimStats) else None
    else:
        baseline = next((r for r in ok if r.policy == Policy.GTO.value), None)

    write_reports(ok, args.out)
    if ok:
        print(format_table(ok, baseline))
    for c, exc in failed:
        print(f"run failed [{c.scheduler.value}]: {type(exc).__name__}: {exc}",
              file=sys.stderr)
    if args.debug_coherence:
        bad = sum(s.coherence_violations for s in ok)
        print(f"coherence auditor: {bad} violating cycles")
    print(f"reports written to {args.out}/")
    return EXIT_RUN_FAILED if failed else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        return cmd_run(args)
    except (Infeasible, InvalidRatio, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
