"""Victim tag array, interference list and the IRS interference score."""

from __future__ import annotations

import enum
from collections import deque
from fractions import Fraction
from typing import Deque, Dict, List, Optional, Tuple

from .config import SimConfig
from .l1d import EvictionEvent


class EpochKind(enum.Enum):
    HIGH = "high"
    LOW = "low"


class IrsUndefined(Exception):
    """IRS queried before any instruction executed."""


COUNTER_MAX = 3


def step_counter(interferer: int, counter: int, evictor: int) -> Tuple[int, int]:
    """One interference-list update for a VTA hit caused by ``evictor``.

    Same interferer saturates upward; a different one decrements, and the
    entry is handed to the newcomer once the counter lands on zero.
    """
    if evictor == interferer:
        return interferer, min(counter + 1, COUNTER_MAX)
    counter = max(counter - 1, 0)
    if counter == 0:
        return evictor, 0
    return interferer, counter


class VtaDetector:
    def __init__(self, cfg: SimConfig, n_warps: Optional[int] = None):
        n = n_warps or cfg.max_warps
        self.n_warps = n
        self.entries_per_set = cfg.vta_entries_per_warp
        self.high_epoch = cfg.high_epoch_insts
        self.low_epoch = cfg.low_epoch_insts
        self.windowed = cfg.irs_windowed
        self.sets: List[Deque[Tuple[int, int]]] = [
            deque(maxlen=self.entries_per_set) for _ in range(cfg.vta_sets)]
        self.interferer = list(range(n))
        self.counter = [0] * n
        self.vta_hits = [0] * n
        self.inst_total = 0
        self.active_warps = n
        self.matrix: Dict[Tuple[int, int], int] = {}
        # snapshot at the last high epoch, for windowed IRS
        self._win_hits = [0] * n
        self._win_insts = 0

    def record_eviction(self, ev: EvictionEvent) -> None:
        if ev.victim_owner < 0:
            return
        self.sets[ev.victim_owner].append((ev.evicted_block, ev.evictor))

    def check_vta(self, warp: int, block: int) -> Optional[int]:
        """Evictor of ``block`` if it sits in ``warp``'s VTA set (entry consumed)."""
        vset = self.sets[warp]
        for idx, (b, evictor) in enumerate(vset):
            if b == block:
                del vset[idx]
                self.vta_hits[warp] += 1
                key = (warp, evictor)
                self.matrix[key] = self.matrix.get(key, 0) + 1
                self.update_interference(warp, evictor)
                return evictor
        return None

    def update_interference(self, victim: int, evictor: int) -> None:
        self.interferer[victim], self.counter[victim] = step_counter(
            self.interferer[victim], self.counter[victim], evictor)

    def most_interfering(self, warp: int) -> int:
        return self.interferer[warp]

    def count_instruction(self) -> None:
        self.inst_total += 1

    def irs(self, warp: int) -> Fraction:
        hits, insts = self.vta_hits[warp], self.inst_total
        if self.windowed:
            hits -= self._win_hits[warp]
            insts -= self._win_insts
        if insts <= 0 or self.active_warps <= 0:
            raise IrsUndefined("no instructions executed yet")
        return Fraction(hits * self.active_warps, insts)

    def epoch_tick(self, kind: EpochKind) -> bool:
        n = self.inst_total
        length = self.high_epoch if kind is EpochKind.HIGH else self.low_epoch
        return n > 0 and n % length == 0

    def close_window(self) -> None:
        self._win_hits = list(self.vta_hits)
        self._win_insts = self.inst_total


def irs_value(vta_hits: int, inst_total: int, active_warps: int) -> Fraction:
    if inst_total <= 0 or active_warps <= 0:
        raise IrsUndefined("no instructions executed yet")
    return Fraction(vta_hits * active_warps, inst_total)
