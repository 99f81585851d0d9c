"""Set-associative L1D with warp-tagged lines, XOR set hashing and a shared MSHR."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .config import SimConfig, Space

NO_WARP = -1


class Outcome(enum.IntEnum):
    HIT = 0
    MISS_ISSUED = 1
    MISS_MERGED = 2
    BYPASSED = 3


class Dest(enum.Enum):
    L1D = "l1d"
    SMEM = "smem"


class MshrFull(Exception):
    """No MSHR entry is free and the request cannot merge."""


class NotPresent(Exception):
    """The block is not resident in the cache."""


def set_index(block: int, n_sets: int, xor_hash: bool = True) -> int:
    """Set of a block index: low set bits XOR the next-higher set bits."""
    mask = n_sets - 1
    if not xor_hash:
        return block & mask
    bits = n_sets.bit_length() - 1
    return (block & mask) ^ ((block >> bits) & mask)


@dataclass(slots=True)
class CacheLine:
    block: int
    owner: int
    lru_stamp: int
    valid: bool = True
    dirty: bool = False
    pending: bool = False


@dataclass(frozen=True, slots=True)
class EvictionEvent:
    evicted_block: int
    victim_owner: int
    evictor: int


@dataclass(slots=True)
class MshrEntry:
    block: int
    destination: Dest
    fill_ready_cycle: int
    smem_addr: Optional[int] = None
    waiters: List[int] = field(default_factory=list)
    from_response_queue: bool = False


class Mshr:
    """Miss status holding registers shared by L1D and the shared-memory cache.

    Also models the L2 request port (fixed serialization per request) and the
    response queue that carries blocks evicted from L1D during migration.
    """

    def __init__(self, cfg: SimConfig):
        self.capacity = cfg.mshr_entries
        self.l2_latency = cfg.l2_hit_latency_cycles
        self.dram_latency = cfg.dram_latency_cycles
        self.l2_miss_ratio = cfg.l2_miss_ratio
        self.port_cycles = cfg.mem_port_cycles
        self.respq_latency = cfg.response_queue_latency_cycles
        self.entries: Dict[int, MshrEntry] = {}
        self.response_queue: set = set()
        self._events: list = []
        self._port_free = 0
        self._seq = 0
        self.l2_requests = 0
        self.respq_fills = 0

    def __contains__(self, block: int) -> bool:
        return block in self.entries

    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    def _l2_latency(self, block: int) -> int:
        if self.l2_miss_ratio <= 0.0:
            return self.l2_latency
        # deterministic per-block L2 miss classification (Knuth multiplicative hash)
        h = (block * 2654435761) & 0xFFFFFFFF
        if h < self.l2_miss_ratio * 2**32:
            return self.dram_latency
        return self.l2_latency

    def allocate(self, block: int, dest: Dest, warp: int, now: int,
                 smem_addr: Optional[int] = None) -> MshrEntry:
        entries = self.entries
        if block in entries:
            raise ValueError(f"block {block:#x} already has an MSHR entry")
        if len(entries) >= self.capacity:
            raise MshrFull()
        start = now + 1
        if block in self.response_queue:
            self.response_queue.discard(block)
            ready = start + self.respq_latency
            from_rq = True
            self.respq_fills += 1
        else:
            issue = max(start, self._port_free)
            self._port_free = issue + self.port_cycles
            ready = issue + self._l2_latency(block)
            from_rq = False
            self.l2_requests += 1
        entry = MshrEntry(block, dest, ready, smem_addr, [warp], from_rq)
        entries[block] = entry
        self._seq += 1
        heapq.heappush(self._events, (ready, self._seq, block))
        return entry

    def merge(self, block: int, warp: int) -> MshrEntry:
        entry = self.entries[block]
        entry.waiters.append(warp)
        return entry

    def next_ready(self) -> Optional[int]:
        return self._events[0][0] if self._events else None

    def pop_ready(self, now: int) -> List[MshrEntry]:
        done = []
        ev = self._events
        while ev and ev[0][0] <= now:
            _, _, block = heapq.heappop(ev)
            done.append(self.entries.pop(block))
        return done


class CacheModel:
    """L1 data cache: LRU, allocate-on-miss for loads, write no-allocate.

    Lines are installed when the miss is issued and stay ``pending`` until the
    MSHR fill arrives; a re-reference to a pending line merges into the MSHR.
    """

    def __init__(self, cfg: SimConfig, mshr: Optional[Mshr] = None,
                 on_evict: Optional[Callable[[EvictionEvent], None]] = None,
                 n_warps: Optional[int] = None):
        self.cfg = cfg
        self.n_sets = cfg.l1d_sets
        self.ways = cfg.l1d_ways
        self.shift = cfg.line_shift
        self.xor_hash = cfg.xor_hash
        self._mask = self.n_sets - 1
        self._bits = self.n_sets.bit_length() - 1 if cfg.xor_hash else 0
        self.sets: List[Dict[int, CacheLine]] = [{} for _ in range(self.n_sets)]
        self.mshr = mshr if mshr is not None else Mshr(cfg)
        self.on_evict = on_evict
        self._stamp = 0
        n = n_warps or cfg.max_warps
        self.hits = [0] * n
        self.misses = [0] * n
        self.evictions_caused = [0] * n
        self.evictions_suffered = [0] * n
        self.writebacks = 0
        self.write_queue = 0

    def set_of(self, block: int) -> int:
        return set_index(block, self.n_sets, self.xor_hash)

    def lookup(self, block: int) -> Optional[CacheLine]:
        mask = self._mask
        if self._bits:
            return self.sets[(block & mask) ^ ((block >> self._bits) & mask)].get(block)
        return self.sets[block & mask].get(block)

    def probe_tag(self, addr: int) -> Optional[int]:
        """Owner warp if the block of ``addr`` is resident, else None. No LRU update."""
        line = self.lookup(addr >> self.shift)
        return None if line is None else line.owner

    def access(self, warp: int, addr: int, is_store: bool = False,
               space: Space = Space.GLOBAL, now: int = 0) -> Outcome:
        block = addr >> self.shift
        mask = self._mask
        if self._bits:
            s = self.sets[(block & mask) ^ ((block >> self._bits) & mask)]
        else:
            s = self.sets[block & mask]
        line = s.get(block)
        if line is not None:
            self._stamp += 1
            line.lru_stamp = self._stamp
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
        if is_store:
            # write no-allocate
            self.misses[warp] += 1
            self.write_queue += 1
            return Outcome.BYPASSED
        mshr = self.mshr
        entry = mshr.entries.get(block)
        if entry is None and len(mshr.entries) >= mshr.capacity:
            raise MshrFull()
        if entry is not None and entry.destination is not Dest.L1D:
            mshr.merge(block, warp)
            self.misses[warp] += 1
            return Outcome.MISS_MERGED
        if len(s) >= self.ways:
            victim = min(s.values(), key=_lru_key)
            del s[victim.block]
            if victim.dirty:
                self.writebacks += 1
            self.evictions_caused[warp] += 1
            if 0 <= victim.owner < len(self.evictions_suffered):
                self.evictions_suffered[victim.owner] += 1
            if self.on_evict is not None:
                self.on_evict(EvictionEvent(victim.block, victim.owner, warp))
        self._stamp += 1
        s[block] = CacheLine(block, warp, self._stamp, pending=True)
        self.misses[warp] += 1
        if entry is not None:
            # fill already in flight for this block
            mshr.merge(block, warp)
            return Outcome.MISS_MERGED
        mshr.allocate(block, Dest.L1D, warp, now)
        return Outcome.MISS_ISSUED

    def fill(self, block: int) -> None:
        line = self.lookup(block)
        if line is not None:
            line.pending = False

    def invalidate(self, block: int) -> bool:
        s = self.sets[self.set_of(block)]
        line = s.pop(block, None)
        if line is None:
            return False
        if line.dirty:
            self.writebacks += 1
        return True

    def evict_to_response_queue(self, addr: int) -> bool:
        """Invalidate a resident block and hand its data to the response queue."""
        block = addr >> self.shift
        line = self.lookup(block)
        if line is None:
            raise NotPresent(f"block {block:#x} not in L1D")
        self.invalidate(block)
        if not line.pending:
            self.mshr.response_queue.add(block)
        return True

    def resident_blocks(self):
        for s in self.sets:
            yield from s.keys()


def _lru_key(line: CacheLine) -> int:
    return line.lru_stamp
