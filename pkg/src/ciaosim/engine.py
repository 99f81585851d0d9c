"""Cycle loop for one SM: issue, route, fill, epoch bookkeeping and statistics."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .config import Kind, Policy, SimConfig, Space, TraceRecord
from .l1d import CacheModel, Dest, Mshr, MshrFull, Outcome
from .scheduler import SchedulerState
from .smem import SmemCache, Smmt, reserve_cache_space
from .vta import VtaDetector

TIMELINE_PERIOD = 1000

_ALU, _LOAD, _STORE = 0, 1, 2
_KIND_CODE = {Kind.ALU: _ALU, Kind.LOAD: _LOAD, Kind.STORE: _STORE}


class MalformedTrace(ValueError):
    pass


class CoherenceViolation(AssertionError):
    pass


@dataclass
class SimStats:
    policy: str
    trace: str
    cycles: int
    instructions: int
    issued: List[int]
    l1d_hits: List[int]
    l1d_misses: List[int]
    smem_hits: List[int]
    smem_misses: List[int]
    vta_hits: List[int]
    interference: Dict[Tuple[int, int], int]
    outcomes: Dict[str, int]
    timeline: List[Tuple[int, int, int, int]]
    epochs: List[tuple]
    transitions: List[tuple]
    l1d_evictions: int = 0
    smem_evictions: int = 0
    migrations: int = 0
    smem_cache_rows: int = 0
    smem_cta_rows: int = 0
    coherence_violations: int = 0
    access_log: Optional[List[Tuple[int, int, str, int]]] = None
    issue_log: Optional[List[Tuple[int, int]]] = None

    @property
    def ipc(self) -> float:
        return self.instructions / self.cycles if self.cycles else 0.0

    @staticmethod
    def _rate(h, m) -> float:
        h, m = sum(h), sum(m)
        return h / (h + m) if h + m else 0.0

    @property
    def l1d_hit_rate(self) -> float:
        return self._rate(self.l1d_hits, self.l1d_misses)

    @property
    def smem_hit_rate(self) -> float:
        return self._rate(self.smem_hits, self.smem_misses)

    @property
    def combined_hit_rate(self) -> float:
        return self._rate(self.l1d_hits + self.smem_hits, self.l1d_misses + self.smem_misses)

    @property
    def smem_accesses(self) -> int:
        return sum(self.smem_hits) + sum(self.smem_misses)

    def steady_hit_rate(self, fraction: float = 0.5, target: Optional[str] = None) -> float:
        """Hit rate over the last ``fraction`` of logged accesses."""
        if self.access_log is None:
            raise ValueError("run with record_accesses=True")
        log = self.access_log
        tail = log[int(len(log) * (1 - fraction)):]
        if target is not None:
            tail = [a for a in tail if a[2] == target]
        if not tail:
            return 0.0
        return sum(1 for a in tail if a[3] == Outcome.HIT) / len(tail)


def _compile(trace: Sequence[TraceRecord], n_warps: int):
    streams: List[list] = [[] for _ in range(n_warps)]
    for lineno, rec in enumerate(trace, 1):
        w = rec.warp
        if not 0 <= w < n_warps:
            raise MalformedTrace(f"record {lineno}: warp {w} outside 0..{n_warps - 1}")
        code = _KIND_CODE[rec.kind]
        if code != _ALU and rec.addr is None:
            raise MalformedTrace(f"record {lineno}: memory record without address")
        streams[w].append((code, rec.addr, rec.space is Space.LOCAL))
    return streams


def _warp_count(trace: Sequence[TraceRecord], cfg: SimConfig) -> int:
    hi = -1
    for rec in trace:
        if rec.warp > hi:
            hi = rec.warp
    if hi >= cfg.max_warps:
        raise MalformedTrace(f"warp id {hi} exceeds max_warps={cfg.max_warps}")
    return hi + 1


def run(trace: Sequence[TraceRecord], cfg: SimConfig, *, name: str = "trace",
        debug_coherence: bool = False, record_accesses: bool = False,
        record_issue: bool = False, track_smem_rows: bool = False) -> SimStats:
    """Simulate ``trace`` to completion under ``cfg`` and return its statistics."""
    n = _warp_count(trace, cfg)
    streams = _compile(trace, n)
    policy = cfg.scheduler

    det = VtaDetector(cfg, n)
    mshr = Mshr(cfg)
    l1d = CacheModel(cfg, mshr, on_evict=det.record_eviction, n_warps=n)
    smmt = Smmt(cfg.smem_rows_per_bank)
    cta_rows = round(cfg.smem_cta_fraction * cfg.smem_rows_per_bank)
    if cta_rows:
        smmt.reserve_cta(0, cta_rows)
    smem = None
    if policy.uses_smem:
        tu = reserve_cache_space(smmt, cfg)
        smem = SmemCache(cfg, tu, mshr, l1d, on_evict=det.record_eviction,
                         n_warps=n, track_rows=track_smem_rows)
    sched = SchedulerState(cfg, n)
    warps = sched.warps
    is_ciao = policy.is_ciao
    is_ccws = policy is Policy.CCWS_LITE
    low_len, high_len = cfg.low_epoch_insts, cfg.high_epoch_insts
    windowed = cfg.irs_windowed

    pcs = [0] * n
    lens = [len(s) for s in streams]
    issued = [0] * n
    ready = 0
    live = 0
    for w in range(n):
        if lens[w]:
            ready |= 1 << w
            live += 1
        else:
            sched.finish(w)
    det.active_warps = live
    blocked = [False] * n
    mshr_wait = 0
    outcomes = {o.name: 0 for o in Outcome}
    timeline: List[Tuple[int, int, int, int]] = []
    epochs: List[tuple] = []
    access_log = [] if record_accesses else None
    issue_log = [] if record_issue else None
    violations = 0
    smem_ok = smem is not None and smem.tu.cache_rows > 0
    i_flags = [False] * n if smem_ok else None

    def finish(w: int) -> None:
        nonlocal live
        live -= 1
        sched.finish(w)
        det.active_warps = live

    def log_high(i: int, now: int) -> None:
        irs, action, target = sched.ciao_high_epoch_step(i, det)
        epochs.append(("high", det.inst_total // high_len, det.inst_total, now,
                       i, float(irs), action, target))

    def log_low(now: int, kind: str = "low") -> bool:
        cand = sched.low_epoch_candidate()
        if cand is None:
            return False
        k, irs_k, action = sched.ciao_low_epoch_step(cand, det)
        epochs.append((kind, det.inst_total // low_len, det.inst_total, now,
                       k, float(irs_k), action, cand))
        if action == "none":
            sched.rotate(cand)
            return False
        return True

    def sample_until(upto: int) -> None:
        # one sample per elapsed period boundary; state is constant in between
        nxt = (len(timeline) + 1) * TIMELINE_PERIOD
        if nxt > upto:
            return
        a, i, s = sched.counts()
        while nxt <= upto:
            timeline.append((nxt, a, i, s))
            nxt += TIMELINE_PERIOD

    def audit() -> int:
        if smem is None or not smem.where:
            return 0
        resident = smem.where
        for s in l1d.sets:
            for b in s:
                if b in resident:
                    return 1
        return 0

    now = 0
    events = mshr._events
    mshr_entries, mshr_cap = mshr.entries, mshr.capacity
    while live:
        if events and events[0][0] <= now:
            done = mshr.pop_ready(now)
            for e in done:
                if e.destination is Dest.L1D:
                    l1d.fill(e.block)
                else:
                    smem.fill(e.block)
                for w in e.waiters:
                    if blocked[w]:
                        blocked[w] = False
                        if pcs[w] == lens[w]:
                            finish(w)
                        else:
                            ready |= 1 << w
            if mshr_wait:
                # one waiter per freed entry, oldest schedulable warps first
                pool = mshr_wait & sched.eligible or mshr_wait
                for _ in range(len(done)):
                    if not pool:
                        break
                    low = pool & -pool
                    pool ^= low
                    mshr_wait ^= low
                    ready |= low
            if not live:
                break

        w = sched.select_warp(ready)
        if w is None:
            if mshr_wait and len(mshr_entries) < mshr_cap:
                ready |= mshr_wait
                mshr_wait = 0
                continue
            if events:
                nxt = events[0][0]
                if nxt > now + 1:
                    sample_until(nxt)
                    now = nxt
                    continue
            elif is_ciao:
                # nothing in flight and every live warp throttled
                if not log_low(now, "drain"):
                    woke = sched.force_reactivate()
                    if woke is None:
                        raise RuntimeError("no warp can make progress")
                    epochs.append(("drain", det.inst_total // low_len, det.inst_total,
                                   now, -1, 0.0, "reactivate", woke))
            else:
                raise RuntimeError("no warp can make progress")
            now += 1
            if now % TIMELINE_PERIOD == 0:
                sample_until(now)
            continue

        code, addr, local = streams[w][pcs[w]]
        if code != _ALU:
            is_store = code == _STORE
            space = Space.LOCAL if local else Space.GLOBAL
            block = addr >> 7
            if (not is_store and len(mshr_entries) >= mshr_cap
                    and block not in mshr_entries
                    and not (block in smem.where if smem_ok and warps[w].I
                             else l1d.lookup(block) is not None)):
                # would need a free MSHR entry; wait for the next fill
                ready &= ~(1 << w)
                mshr_wait |= 1 << w
                continue
            try:
                if smem_ok and warps[w].I:
                    out = smem.access(w, addr, is_store, space, now)
                    where = "smem"
                else:
                    if smem is not None and (smem.where or mshr.entries):
                        entry = mshr.entries.get(block)
                        if is_store:
                            smem.invalidate(block)
                        elif entry is not None and entry.destination is Dest.SMEM:
                            smem.invalidate(block)
                            entry.destination = Dest.L1D
                            entry.smem_addr = None
                        elif block in smem.where:
                            smem.evict_to_response_queue(addr)
                            smem.migrations += 1
                    out = l1d.access(w, addr, is_store, space, now)
                    where = "l1d"
            except MshrFull:
                ready &= ~(1 << w)
                mshr_wait |= 1 << w
                continue
            outcomes[out.name] += 1
            if access_log is not None:
                access_log.append((now, w, where, out))
            if out == Outcome.MISS_ISSUED or out == Outcome.MISS_MERGED:
                ready &= ~(1 << w)
                blocked[w] = True
                if out == Outcome.MISS_ISSUED:
                    det.check_vta(w, block)
        if issue_log is not None:
            issue_log.append((now, w))
        pcs[w] += 1
        issued[w] += 1
        det.inst_total += 1
        if pcs[w] == lens[w] and not blocked[w]:
            ready &= ~(1 << w)
            finish(w)

        t = det.inst_total
        if is_ciao:
            if t % low_len == 0:
                log_low(now)
            if t % high_len == 0:
                if not warps[w].finished:
                    log_high(w, now)
                if windowed:
                    det.close_window()
        elif is_ccws and t % low_len == 0:
            sched.ccws_lite_update(det)

        if debug_coherence:
            violations += audit()
        now += 1
        if now % TIMELINE_PERIOD == 0:
            sample_until(now)

    cycles = now
    if debug_coherence:
        violations += audit()
    return SimStats(
        policy=policy.value,
        trace=name,
        cycles=cycles,
        instructions=det.inst_total,
        issued=issued,
        l1d_hits=list(l1d.hits),
        l1d_misses=list(l1d.misses),
        smem_hits=list(smem.hits) if smem else [0] * n,
        smem_misses=list(smem.misses) if smem else [0] * n,
        vta_hits=list(det.vta_hits),
        interference=dict(sorted(det.matrix.items())),
        outcomes=outcomes,
        timeline=timeline,
        epochs=epochs,
        transitions=list(sched.transitions),
        l1d_evictions=sum(l1d.evictions_caused),
        smem_evictions=sum(smem.evictions_caused) if smem else 0,
        migrations=(smem.migrations if smem else 0),
        smem_cache_rows=(smem.tu.cache_rows if smem else 0),
        smem_cta_rows=cta_rows,
        coherence_violations=violations,
        access_log=access_log,
        issue_log=issue_log,
    )


def _run_cell(args):
    trace, cfg, name, kwargs = args
    try:
        return run(trace, cfg, name=name, **kwargs)
    except Exception as exc:  # reported per cell
        return exc


def run_matrix(traces: Union[Mapping[str, Sequence[TraceRecord]], Sequence[Sequence[TraceRecord]]],
               cfgs: Sequence[SimConfig], *, threads: Optional[int] = None,
               **kwargs) -> List[Union[SimStats, Exception]]:
    """Run every (trace, config) cell independently, trace-major order.

    A failing cell yields its exception in place of a `SimStats`.
    """
    if isinstance(traces, Mapping):
        named = list(traces.items())
    else:
        named = [(f"trace{k}", t) for k, t in enumerate(traces)]
    cells = [(t, c, name, kwargs) for name, t in named for c in cfgs]
    if threads is None:
        threads = int(os.environ.get("CIAO_SIM_THREADS", "1") or 1)
    if threads <= 1 or len(cells) <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_cell, cells))


SUMMARY_FIELDS = ["policy", "trace", "cycles", "instructions", "ipc",
                  "l1d_hit_rate", "smem_hit_rate"]


def write_reports(results: Sequence[SimStats], out_dir: Union[str, Path]) -> None:
    """Write summary, interference, timeline and epoch CSVs for ``results``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(SUMMARY_FIELDS + ["smem_cache_rows", "smem_cta_rows"])
        for s in results:
            wr.writerow([s.policy, s.trace, s.cycles, s.instructions, f"{s.ipc:.6f}",
                         f"{s.l1d_hit_rate:.6f}", f"{s.smem_hit_rate:.6f}",
                         s.smem_cache_rows, s.smem_cta_rows])
    with open(out / "interference.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["policy", "trace", "victim", "evictor", "count"])
        for s in results:
            for (victim, evictor), c in s.interference.items():
                wr.writerow([s.policy, s.trace, victim, evictor, c])
    with open(out / "timeline.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["policy", "trace", "cycle", "active", "isolated", "stalled"])
        for s in results:
            for row in s.timeline:
                wr.writerow([s.policy, s.trace, *row])
    with open(out / "epochs.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["policy", "trace", "epoch_kind", "epoch", "instructions", "cycle",
                     "warp", "irs", "action", "target"])
        for s in results:
            for ev in s.epochs:
                kind, epoch, insts, cyc, warp, irs, action, target = ev
                wr.writerow([s.policy, s.trace, kind, epoch, insts, cyc, warp,
                             f"{irs:.6f}", action, target])
