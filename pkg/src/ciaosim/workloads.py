"""Trace file I/O and synthetic workload generators."""

from __future__ import annotations

import dataclasses
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from .config import Kind, SimConfig, Space, TraceRecord, default_config
from .l1d import set_index

Trace = List[TraceRecord]

# generated addresses stay below 2**40
ADDRESS_BUDGET_BITS = 40


class ParseError(ValueError):
    def __init__(self, lineno: int, token: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {token!r}")
        self.lineno = lineno
        self.token = token


class Infeasible(ValueError):
    """No colliding addresses fit in the address budget."""


class InvalidRatio(ValueError):
    pass


# -- trace files ---------------------------------------------------------------

_KINDS = {k.value: k for k in Kind}


def parse_line(line: str, lineno: int = 1) -> Optional[TraceRecord]:
    body = line.split("#", 1)[0].split()
    if not body:
        return None
    try:
        warp = int(body[0], 10)
    except ValueError:
        raise ParseError(lineno, body[0], "bad warp id") from None
    if warp < 0:
        raise ParseError(lineno, body[0], "bad warp id")
    if len(body) < 2 or body[1] not in _KINDS:
        raise ParseError(lineno, body[1] if len(body) > 1 else "", "bad record kind")
    kind = _KINDS[body[1]]
    rest = body[2:]
    if kind is Kind.ALU:
        if rest:
            raise ParseError(lineno, rest[0], "ALU record takes no operands")
        return TraceRecord(warp, kind)
    if not rest:
        raise ParseError(lineno, line.strip(), "memory record without address")
    try:
        addr = int(rest[0], 16)
    except ValueError:
        raise ParseError(lineno, rest[0], "bad hex address") from None
    if addr < 0:
        raise ParseError(lineno, rest[0], "bad hex address")
    space = Space.GLOBAL
    if len(rest) > 1:
        if rest[1] != "local" or len(rest) > 2:
            raise ParseError(lineno, rest[1], "unexpected token")
        space = Space.LOCAL
    return TraceRecord(warp, kind, addr, space)


def parse_trace(text: str) -> Trace:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        rec = parse_line(line, lineno)
        if rec is not None:
            out.append(rec)
    return out


def read_trace(path: Union[str, Path]) -> Trace:
    return parse_trace(Path(path).read_text())


def format_record(rec: TraceRecord) -> str:
    if rec.kind is Kind.ALU:
        return f"{rec.warp} A"
    s = f"{rec.warp} {rec.kind.value} {rec.addr:#010x}"
    return s + " local" if rec.space is Space.LOCAL else s


def format_trace(trace: Iterable[TraceRecord]) -> str:
    return "".join(format_record(r) + "\n" for r in trace)


def write_trace(trace: Iterable[TraceRecord], path: Union[str, Path]) -> None:
    Path(path).write_text(format_trace(trace))


def footprint_bytes(trace: Iterable[TraceRecord], line_bytes: int = 128) -> int:
    """Distinct blocks touched, in bytes."""
    shift = line_bytes.bit_length() - 1
    return len({r.addr >> shift for r in trace if r.addr is not None}) * line_bytes


# -- thrashing -------------------------------------------------------------------

def thrash_blocks_per_warp(warps: int, ways: int) -> int:
    """Blocks each warp keeps live in a set so that the set overflows under sharing."""
    return min(ways, math.ceil((ways + 1) / warps))


def colliding_block(target_set: int, k: int, n_sets: int, xor_hash: bool = True) -> int:
    """The ``k``-th block index (k >= 0) that maps to ``target_set``.

    Inverts the hash: for any upper part ``hi`` the low set bits are
    ``target_set ^ hi`` (XOR) or ``target_set`` (modulo), so every ``k``
    names a distinct block.
    """
    bits = n_sets.bit_length() - 1
    mask = n_sets - 1
    upper = k + 1
    lo = target_set ^ (upper & mask) if xor_hash else target_set
    return (upper << bits) | lo


def gen_thrash(warps: int, sets_touched: int = 1, reuse: int = 64, seed: int = 0,
               cfg: Optional[SimConfig] = None) -> Trace:
    """Every warp loops over private blocks that all collide in the same L1D sets.

    Each of ``reuse`` rounds has every warp load each of its blocks once, so
    with two or more warps the per-set footprint exceeds associativity.
    """
    cfg = cfg or default_config()
    if warps < 1 or warps > cfg.max_warps:
        raise ValueError(f"warps must be in 1..{cfg.max_warps}")
    if not 1 <= sets_touched <= cfg.l1d_sets:
        raise ValueError(f"sets_touched must be in 1..{cfg.l1d_sets}")
    if reuse < 1:
        raise ValueError("reuse must be positive")
    n_sets = cfg.l1d_sets
    k = thrash_blocks_per_warp(warps, cfg.l1d_ways) if warps > 1 else 1
    rng = random.Random(seed)
    sets = sorted(rng.sample(range(n_sets), sets_touched))
    blocks: List[List[int]] = [[] for _ in range(warps)]
    for s in sets:
        for w in range(warps):
            for j in range(k):
                b = colliding_block(s, w * k + j, n_sets, cfg.xor_hash)
                if set_index(b, n_sets, cfg.xor_hash) != s:
                    raise Infeasible(f"generated block {b:#x} misses set {s}")
                blocks[w].append(b)
    shift = cfg.line_shift
    if max(max(bs) for bs in blocks) << shift >= 1 << ADDRESS_BUDGET_BITS:
        raise Infeasible("colliding addresses exceed the address budget")
    trace: Trace = []
    for _ in range(reuse):
        for w in range(warps):
            trace.extend(TraceRecord(w, Kind.LOAD, b << shift) for b in blocks[w])
    return trace


# -- workload classes ------------------------------------------------------------

@dataclass(frozen=True)
class ClassPreset:
    """Shape parameters of a synthetic workload class."""

    warps: int
    footprint_bytes: int
    alu_ratio: float
    # memory instructions per warp
    mem_per_warp: int
    # blocks in each warp's private reuse loop
    hot_blocks: int
    # probability that a memory access goes to the reuse loop
    hot_fraction: float
    # "loop" walks the hot region in order, "random" picks uniformly in it
    hot_pattern: str = "loop"
    # distance between consecutive warps' hot regions; 0 packs them densely
    warp_pitch_bytes: int = 0
    # distance between blocks inside a hot region (column-walk style when large)
    hot_stride_bytes: int = 128
    store_fraction: float = 0.0


PRESETS = {
    "LWS": ClassPreset(warps=48, footprint_bytes=4 << 20, alu_ratio=0.5,
                       mem_per_warp=1200, hot_blocks=6, hot_fraction=0.8),
    "SWS": ClassPreset(warps=48, footprint_bytes=24 << 10, alu_ratio=0.2,
                       mem_per_warp=1000, hot_blocks=4, hot_fraction=0.5),
    "CI": ClassPreset(warps=48, footprint_bytes=64 << 10, alu_ratio=0.95,
                      mem_per_warp=100, hot_blocks=4, hot_fraction=0.8),
}


def _interleave(per_warp: Sequence[list], rng: random.Random) -> Trace:
    # warps keep program order; the file order between warps is shuffled
    order = [w for w, s in enumerate(per_warp) for _ in s]
    rng.shuffle(order)
    pos = [0] * len(per_warp)
    out = []
    for w in order:
        out.append(per_warp[w][pos[w]])
        pos[w] += 1
    return out


def gen_class(cls: str, warps: Optional[int] = None, footprint: Optional[int] = None,
              alu_ratio: Optional[float] = None, seed: int = 0,
              cfg: Optional[SimConfig] = None, **shape) -> Trace:
    """Synthetic LWS / SWS / CI trace.

    Every warp mixes a loop over a private hot region with uniform random
    loads over the whole footprint, padded with ALU records so that ALU
    records make up ``alu_ratio`` of its stream. ``shape`` overrides other
    `ClassPreset` fields.
    """
    key = cls.upper()
    if key not in PRESETS:
        raise ValueError(f"unknown workload class {cls!r}; pick from {sorted(PRESETS)}")
    p = dataclasses.replace(PRESETS[key], **shape)
    cfg = cfg or default_config()
    warps = p.warps if warps is None else warps
    footprint = p.footprint_bytes if footprint is None else footprint
    alu_ratio = p.alu_ratio if alu_ratio is None else alu_ratio
    mem_per_warp = p.mem_per_warp
    if not 0.0 <= alu_ratio <= 1.0:
        raise InvalidRatio(f"alu_ratio {alu_ratio} outside [0, 1]")
    if not 1 <= warps <= cfg.max_warps:
        raise ValueError(f"warps must be in 1..{cfg.max_warps}")
    line = cfg.line_bytes
    total_blocks = max(1, footprint // line)
    hot = max(1, min(p.hot_blocks, total_blocks // warps or 1))
    stride = max(1, p.hot_stride_bytes // line)
    span = (hot - 1) * stride + 1
    if span > total_blocks:
        raise ValueError("hot region does not fit in the footprint")
    # packed layout: contiguous regions side by side, strided ones interleaved
    pitch = p.warp_pitch_bytes // line or (hot if stride == 1 else 1)
    rng = random.Random(f"{key}:{seed}")

    per_warp = []
    for w in range(warps):
        base = (w * pitch) % (total_blocks - span + 1)
        stream: list = []
        if alu_ratio >= 1.0:
            n_mem, n_alu = 0, mem_per_warp
        else:
            n_mem = mem_per_warp
            n_alu = round(n_mem * alu_ratio / (1.0 - alu_ratio))
        # spread ALU records evenly between memory records
        gaps = [n_alu // (n_mem + 1)] * (n_mem + 1) if n_mem else [n_alu]
        for extra in rng.sample(range(len(gaps)), n_alu - sum(gaps)):
            gaps[extra] += 1
        loop_pos = 0
        for m in range(n_mem):
            stream.extend([TraceRecord(w, Kind.ALU)] * gaps[m])
            if rng.random() < p.hot_fraction:
                if p.hot_pattern == "random":
                    blk = base + rng.randrange(hot) * stride
                else:
                    blk = base + loop_pos * stride
                    loop_pos = (loop_pos + 1) % hot
            else:
                blk = rng.randrange(total_blocks)
            kind = Kind.STORE if rng.random() < p.store_fraction else Kind.LOAD
            stream.append(TraceRecord(w, kind, blk * line))
        stream.extend([TraceRecord(w, Kind.ALU)] * gaps[-1])
        per_warp.append(stream)
    return _interleave(per_warp, rng)
