"""Warp scheduling: GTO and its throttled variants, plus the CIAO state machine.

Warp eligibility is kept as integer bitmasks (bit ``w`` = warp ``w``) so the
greedy-then-oldest pick is a lowest-set-bit operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, NamedTuple, Optional

from .config import Policy, SimConfig
from .vta import VtaDetector

ACTIVE, ISOLATED, STALLED = "active", "isolated", "stalled"

_ALLOWED = {
    Policy.CIAO_P: {(ACTIVE, ISOLATED), (ISOLATED, ACTIVE)},
    Policy.CIAO_C: {(ACTIVE, ISOLATED), (ISOLATED, STALLED),
                    (STALLED, ISOLATED), (ISOLATED, ACTIVE)},
    Policy.CIAO_T: {(ACTIVE, STALLED), (STALLED, ACTIVE)},
}


class TransitionError(AssertionError):
    """A CIAO state change outside the permitted flow."""


@dataclass(slots=True)
class WarpState:
    wid: int
    V: bool = True
    I: bool = False
    finished: bool = False

    @property
    def gto_age(self) -> int:
        return self.wid

    @property
    def state(self) -> str:
        if not self.V:
            return STALLED
        return ISOLATED if self.I else ACTIVE


class EpochEvent(NamedTuple):
    kind: str
    epoch: int
    instructions: int
    cycle: int
    warp: int
    irs: float
    action: str
    target: int


class SchedulerState:
    def __init__(self, cfg: SimConfig, n_warps: int):
        self.cfg = cfg
        self.policy = cfg.scheduler
        self.n = n_warps
        self.warps = [WarpState(w) for w in range(n_warps)]
        # pair list: field0 = isolation trigger, field1 = stall trigger
        self.field0: List[Optional[int]] = [None] * n_warps
        self.field1: List[Optional[int]] = [None] * n_warps
        self.high_cutoff = Fraction(str(cfg.high_cutoff))
        self.low_cutoff = Fraction(str(cfg.low_cutoff))
        self.all_mask = (1 << n_warps) - 1
        self.live_mask = self.all_mask
        self.v_mask = self.all_mask
        self.i_mask = 0
        self.eligible = self.all_mask
        self.greedy: Optional[int] = None
        # throttled warps, most recent transition first
        self.throttled: List[int] = []
        self.transitions: List[tuple] = []
        self.ccws_score = [0] * n_warps
        self._ccws_seen = [0] * n_warps
        self.ccws_mask = self.all_mask
        self.swl_limit = cfg.best_swl_limit or cfg.max_warps
        self._refresh()

    # -- eligibility -----------------------------------------------------

    def _refresh(self) -> None:
        live = self.live_mask
        p = self.policy
        if p is Policy.BEST_SWL:
            m, k, rest = 0, self.swl_limit, live
            while rest and k:
                low = rest & -rest
                m |= low
                rest ^= low
                k -= 1
            self.eligible = m
        elif p is Policy.CCWS_LITE:
            # every admitted warp finished before the next rescore: reopen
            self.eligible = (live & self.ccws_mask) or live
        else:
            self.eligible = live & self.v_mask

    def finish(self, w: int) -> None:
        self.warps[w].finished = True
        self.live_mask &= ~(1 << w)
        if w in self.throttled:
            self.throttled.remove(w)
        if self.greedy == w:
            self.greedy = None
        self._refresh()

    def select_warp(self, ready_mask: int) -> Optional[int]:
        """Greedy warp if it can still issue, else the oldest issuable warp."""
        m = ready_mask & self.eligible
        if not m:
            return None
        g = self.greedy
        if g is not None and (m >> g) & 1:
            return g
        g = (m & -m).bit_length() - 1
        self.greedy = g
        return g

    def counts(self):
        a = i = s = 0
        for ws in self.warps:
            if ws.finished:
                continue
            st = ws.state
            if st is ACTIVE:
                a += 1
            elif st is ISOLATED:
                i += 1
            else:
                s += 1
        return a, i, s

    # -- CIAO flag changes -------------------------------------------------

    def _set_flags(self, w: int, V: bool, I: bool) -> None:
        ws = self.warps[w]
        before = ws.state
        ws.V, ws.I = V, I
        after = ws.state
        if before is after:
            return
        if (before, after) not in _ALLOWED.get(self.policy, ()):
            raise TransitionError(f"{self.policy.value}: warp {w} {before} -> {after}")
        self.transitions.append((w, before, after))
        bit = 1 << w
        self.v_mask = self.v_mask | bit if V else self.v_mask & ~bit
        self.i_mask = self.i_mask | bit if I else self.i_mask & ~bit
        if w in self.throttled:
            self.throttled.remove(w)
        if after is not ACTIVE:
            self.throttled.insert(0, w)
        self._refresh()

    def _record(self, fields: List[Optional[int]], w: int, trigger: int) -> None:
        if fields[w] is None or self.cfg.pair_list_overwrite:
            fields[w] = trigger

    def ciao_high_epoch_step(self, i: int, det: VtaDetector):
        """Isolate or stall the warp interfering most with ``i``.

        Returns ``(irs_i, action, target)``.
        """
        ws = self.warps[i]
        irs = det.irs(i)
        if not ws.V or ws.finished:
            return irs, "none", i
        j = det.most_interfering(i)
        if irs <= self.high_cutoff or j == i or self.warps[j].finished:
            return irs, "none", j
        wj = self.warps[j]
        p = self.policy
        if p is Policy.CIAO_T:
            if not wj.V:
                return irs, "none", j
            self._set_flags(j, False, wj.I)
            self._record(self.field1, j, i)
            return irs, "stall", j
        if wj.I:
            if p is Policy.CIAO_P or not wj.V:
                return irs, "none", j
            self._set_flags(j, False, True)
            self._record(self.field1, j, i)
            return irs, "stall", j
        self._set_flags(j, True, True)
        self._record(self.field0, j, i)
        return irs, "isolate", j

    def ciao_low_epoch_step(self, i: int, det: VtaDetector):
        """Reactivate a stalled warp or send an isolated one back to L1D.

        Returns ``(trigger, irs_trigger, action)``; the trigger is -1 when none
        was recorded.
        """
        ws = self.warps[i]
        if ws.finished:
            return -1, 0.0, "none"
        if not ws.V:
            k = self.field1[i]
            if k is None:
                self._set_flags(i, True, ws.I)
                return -1, 0.0, "reactivate"
            irs_k = det.irs(k)
            if irs_k > self.low_cutoff and not self.warps[k].finished:
                return k, irs_k, "none"
            self.field1[i] = None
            self._set_flags(i, True, ws.I)
            return k, irs_k, "reactivate"
        if ws.I:
            k = self.field0[i]
            if k is None:
                self._set_flags(i, True, False)
                return -1, 0.0, "unredirect"
            irs_k = det.irs(k)
            if irs_k > self.low_cutoff and not self.warps[k].finished:
                return k, irs_k, "none"
            self.field0[i] = None
            self._set_flags(i, True, False)
            return k, irs_k, "unredirect"
        return -1, 0.0, "none"

    def low_epoch_candidate(self) -> Optional[int]:
        return self.throttled[0] if self.throttled else None

    def rotate(self, w: int) -> None:
        """Move ``w`` behind the other throttled warps after a no-op check."""
        if self.throttled and self.throttled[0] == w and len(self.throttled) > 1:
            self.throttled.append(self.throttled.pop(0))

    def force_reactivate(self) -> Optional[int]:
        """Wake the most recently stalled warp when no live warp may issue."""
        for w in self.throttled:
            if not self.warps[w].V:
                self.field1[w] = None
                self._set_flags(w, True, self.warps[w].I)
                return w
        return None

    # -- CCWS-like baseline ------------------------------------------------

    def ccws_lite_update(self, det: VtaDetector) -> int:
        """Rescore locality and recompute the CCWS-lite active mask."""
        base = self.cfg.ccws_base_score
        pts = self.cfg.ccws_hit_points
        live = [w for w in range(self.n) if not self.warps[w].finished]
        for w in range(self.n):
            new = det.vta_hits[w] - self._ccws_seen[w]
            self._ccws_seen[w] = det.vta_hits[w]
            self.ccws_score[w] = (self.ccws_score[w] >> 1) + new * pts
        self.ccws_mask = ccws_active_mask(
            [(w, self.ccws_score[w]) for w in live], base, base * len(live))
        self._refresh()
        return self.ccws_mask


def ccws_active_mask(scores, base: int, budget: int) -> int:
    """Highest-locality warps first, admitted while the stacked score fits."""
    order = sorted(scores, key=lambda ws: (-ws[1], ws[0]))
    mask, total = 0, 0
    for w, s in order:
        total += base + s
        if total > budget and mask:
            break
        mask |= 1 << w
    return mask
