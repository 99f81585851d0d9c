"""Unused shared memory as a direct-mapped cache.

Shared memory is viewed as 32 banks of 8-byte words, split into two 16-bank
groups. A 128-byte block fills one row of one group; its tag lives in the
other group so tag and data are read in the same cycle. Tag rows follow the
data rows inside the reservation, 32 tags per row per group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Set

from .config import SimConfig, Space
from .l1d import (CacheModel, Dest, EvictionEvent, Mshr, MshrFull, NotPresent,
                  Outcome)

F_BITS, B_BITS, G_BITS, R_BITS = 3, 4, 1, 8
TAGS_PER_GROUP_ROW = 32
MAX_DATA_ROWS = 1 << R_BITS
# 9-bit block-index component inside the 25-bit tag
FOLD_BITS = 9
TAG_BITS = 25
WID_BITS = 6


class ZeroCapacity(Exception):
    """The translation unit has no rows reserved for caching."""


class SmemLocation(NamedTuple):
    F: int
    B: int
    G: int
    R: int

    def pack(self) -> int:
        return self.F | (self.B << 3) | (self.G << 7) | (self.R << 8)

    @classmethod
    def unpack(cls, word: int) -> "SmemLocation":
        if not 0 <= word < 1 << 16:
            raise ValueError("packed location must fit 16 bits")
        return cls(word & 0x7, (word >> 3) & 0xF, (word >> 7) & 0x1, (word >> 8) & 0xFF)


@dataclass(frozen=True)
class Translation:
    data: SmemLocation
    tag_loc: SmemLocation
    tag: int


def pack_tag(tag: int, wid: int, valid: bool = True) -> int:
    """31-bit stored tag (25-bit tag + 6-bit warp id), plus a valid bit above."""
    if not 0 <= tag < 1 << TAG_BITS:
        raise ValueError("tag exceeds 25 bits")
    if not 0 <= wid < 1 << WID_BITS:
        raise ValueError("warp id exceeds 6 bits")
    return tag | (wid << TAG_BITS) | (int(valid) << (TAG_BITS + WID_BITS))


def unpack_tag(word: int):
    return (word & ((1 << TAG_BITS) - 1),
            (word >> TAG_BITS) & ((1 << WID_BITS) - 1),
            bool(word >> (TAG_BITS + WID_BITS)))


@dataclass(frozen=True)
class SmmtEntry:
    owner: str  # "cta" or "ciao"
    ident: int
    base_row: int
    size_rows: int

    @property
    def rows(self) -> range:
        return range(self.base_row, self.base_row + self.size_rows)


class Smmt:
    """Shared memory management table: row reservations per owner."""

    def __init__(self, total_rows: int):
        self.total_rows = total_rows
        self.entries: List[SmmtEntry] = []

    def _free_ranges(self):
        taken = sorted((e.base_row, e.base_row + e.size_rows) for e in self.entries)
        pos = 0
        for lo, hi in taken:
            if lo > pos:
                yield pos, lo
            pos = max(pos, hi)
        if pos < self.total_rows:
            yield pos, self.total_rows

    def reserve_cta(self, cta: int, rows: int) -> SmmtEntry:
        if rows <= 0:
            raise ValueError("CTA reservation needs at least one row")
        for lo, hi in self._free_ranges():
            if hi - lo >= rows:
                entry = SmmtEntry("cta", cta, lo, rows)
                self.entries.append(entry)
                return entry
        raise MemoryError(f"no {rows} contiguous free shared-memory rows")

    def largest_free(self):
        best = (0, 0)
        for lo, hi in self._free_ranges():
            if hi - lo > best[1] - best[0]:
                best = (lo, hi)
        return best

    def cta_rows(self) -> Set[int]:
        return {r for e in self.entries if e.owner == "cta" for r in e.rows}

    def cache_entry(self) -> Optional[SmmtEntry]:
        for e in self.entries:
            if e.owner == "ciao":
                return e
        return None


def split_rows(unused: int) -> tuple:
    """(data_rows, tag_rows) for ``unused`` free rows; (0, 0) if too small."""
    data = min(MAX_DATA_ROWS, unused * TAGS_PER_GROUP_ROW // (TAGS_PER_GROUP_ROW + 1) + 1)
    while data > 0 and data + math.ceil(data / TAGS_PER_GROUP_ROW) > unused:
        data -= 1
    if data <= 0:
        return 0, 0
    return data, math.ceil(data / TAGS_PER_GROUP_ROW)


@dataclass(frozen=True)
class TranslationUnit:
    cta_mask: int
    data_offset: int
    tag_offset: int
    cache_rows: int
    tag_rows: int

    @property
    def capacity_blocks(self) -> int:
        return 2 * self.cache_rows

    def data_row_range(self) -> range:
        return range(self.data_offset, self.data_offset + self.cache_rows)

    def tag_row_range(self) -> range:
        return range(self.tag_offset, self.tag_offset + self.tag_rows)


def reserve_cache_space(smmt: Smmt, cfg: Optional[SimConfig] = None) -> TranslationUnit:
    """Claim the largest free row range for caching and lay out data and tags."""
    lo, hi = smmt.largest_free()
    data, tags = split_rows(hi - lo)
    segment = max(1, smmt.total_rows // 8)
    mask = 0
    for r in smmt.cta_rows():
        mask |= 1 << min(7, r // segment)
    if data:
        smmt.entries.append(SmmtEntry("ciao", 0, lo, data + tags))
    return TranslationUnit(mask, lo, lo + data, data, tags)


def translate(addr: int, tu: TranslationUnit) -> Translation:
    if tu.cache_rows <= 0:
        raise ZeroCapacity("translation unit has no cache rows")
    f = addr & 0x7
    b = (addr >> 3) & 0xF
    g = (addr >> 7) & 0x1
    row_bits = (addr >> 8) & 0xFF
    r_local = row_bits % tu.cache_rows
    fold = row_bits // tu.cache_rows
    data = SmemLocation(f, b, g, tu.data_offset + r_local)
    pos = r_local & (TAGS_PER_GROUP_ROW - 1)
    half, bank = pos & 1, pos >> 1
    tag_loc = SmemLocation(half << 2, bank, g ^ 1, tu.tag_offset + (r_local >> 5))
    tag = ((addr >> 16) << FOLD_BITS) | fold
    return Translation(data, tag_loc, tag)


@dataclass(slots=True)
class SmemLine:
    block: int
    tag: int
    owner: int
    pending: bool = True
    dirty: bool = False


class SmemCache:
    def __init__(self, cfg: SimConfig, tu: TranslationUnit, mshr: Mshr,
                 l1d: Optional[CacheModel] = None,
                 on_evict: Optional[Callable[[EvictionEvent], None]] = None,
                 n_warps: Optional[int] = None, track_rows: bool = False):
        self.cfg = cfg
        self.tu = tu
        self.mshr = mshr
        self.l1d = l1d
        self.on_evict = on_evict
        self.shift = cfg.line_shift
        self.slots: Dict[int, SmemLine] = {}
        self.where: Dict[int, int] = {}
        n = n_warps or cfg.max_warps
        self.hits = [0] * n
        self.misses = [0] * n
        self.evictions_caused = [0] * n
        self.evictions_suffered = [0] * n
        self.migrations = 0
        self.writebacks = 0
        self.write_queue = 0
        self.track_rows = track_rows
        self.rows_touched: Set[int] = set()

    @property
    def capacity(self) -> int:
        return self.tu.capacity_blocks

    def _slot(self, block: int):
        # G is block bit 0, R_local the next 8 bits folded by cache_rows
        rows = self.tu.cache_rows
        row_bits = (block >> 1) & 0xFF
        r_local = row_bits % rows
        return r_local * 2 + (block & 1), r_local

    def holds(self, block: int) -> bool:
        return block in self.where

    def probe(self, addr: int) -> Optional[int]:
        slot = self.where.get(addr >> self.shift)
        return None if slot is None else self.slots[slot].owner

    def invalidate(self, block: int) -> bool:
        slot = self.where.pop(block, None)
        if slot is None:
            return False
        line = self.slots.pop(slot)
        if line.dirty:
            self.writebacks += 1
        return True

    def evict_to_response_queue(self, addr: int) -> bool:
        block = addr >> self.shift
        slot = self.where.get(block)
        if slot is None:
            raise NotPresent(f"block {block:#x} not in shared-memory cache")
        pending = self.slots[slot].pending
        self.invalidate(block)
        if not pending:
            self.mshr.response_queue.add(block)
        return True

    def fill(self, block: int) -> None:
        slot = self.where.get(block)
        if slot is not None:
            self.slots[slot].pending = False

    def _install(self, slot: int, block: int, warp: int) -> None:
        old = self.slots.get(slot)
        if old is not None:
            del self.where[old.block]
            if old.dirty:
                self.writebacks += 1
            self.evictions_caused[warp] += 1
            if 0 <= old.owner < len(self.evictions_suffered):
                self.evictions_suffered[old.owner] += 1
            if self.on_evict is not None:
                self.on_evict(EvictionEvent(old.block, old.owner, warp))
        tag = ((block >> 9) << FOLD_BITS) | (((block >> 1) & 0xFF) // self.tu.cache_rows)
        self.slots[slot] = SmemLine(block, tag, warp)
        self.where[block] = slot

    def access(self, warp: int, addr: int, is_store: bool = False,
               space: Space = Space.GLOBAL, now: int = 0) -> Outcome:
        if self.tu.cache_rows <= 0:
            raise ZeroCapacity("translation unit has no cache rows")
        block = addr >> self.shift
        slot, r_local = self._slot(block)
        if self.track_rows:
            self.rows_touched.add(self.tu.data_offset + r_local)
            self.rows_touched.add(self.tu.tag_offset + (r_local >> 5))
        line = self.slots.get(slot)
        if line is not None and line.block == block:
            if line.pending:
                if is_store:
                    self.misses[warp] += 1
                    self.write_queue += 1
                    return Outcome.BYPASSED
                self.mshr.merge(block, warp)
                self.misses[warp] += 1
                return Outcome.MISS_MERGED
            if is_store:
                if space is Space.LOCAL:
                    line.dirty = True
                else:
                    self.write_queue += 1
            self.hits[warp] += 1
            return Outcome.HIT
        l1d = self.l1d
        if is_store:
            # write no-allocate; the L1D copy would go stale
            if l1d is not None:
                l1d.invalidate(block)
            self.misses[warp] += 1
            self.write_queue += 1
            return Outcome.BYPASSED
        mshr = self.mshr
        entry = mshr.entries.get(block)
        if entry is not None:
            if entry.destination is not Dest.SMEM:
                if l1d is not None:
                    l1d.invalidate(block)
                entry.destination = Dest.SMEM
                entry.smem_addr = slot
            self._install(slot, block, warp)
            mshr.merge(block, warp)
            self.misses[warp] += 1
            return Outcome.MISS_MERGED
        if mshr.full():
            raise MshrFull()
        if l1d is not None and l1d.probe_tag(addr) is not None:
            l1d.evict_to_response_queue(addr)
            self.migrations += 1
        self._install(slot, block, warp)
        mshr.allocate(block, Dest.SMEM, warp, now, smem_addr=slot)
        self.misses[warp] += 1
        return Outcome.MISS_ISSUED

    def resident_blocks(self):
        return self.where.keys()
