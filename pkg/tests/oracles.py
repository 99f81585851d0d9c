"""Reference models written independently of the package internals.

Each oracle favours obviousness over speed: plain lists, string bit slicing,
textbook LRU. Tests compare the package against these.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple


def bits(value: int, lo: int, width: int) -> int:
    """Bit field [lo, lo+width) of ``value`` via its binary string."""
    s = format(value, "064b")[::-1]  # s[i] is bit i
    return int(s[lo:lo + width][::-1] or "0", 2)


def ref_set_index(block: int, n_sets: int, xor_hash: bool = True) -> int:
    w = n_sets.bit_length() - 1
    low = bits(block, 0, w)
    return low ^ bits(block, w, w) if xor_hash else low


def arith_set_index(block: int, n_sets: int, xor_hash: bool = True) -> int:
    """Same hash as `ref_set_index` using modulo and floor division."""
    low = block % n_sets
    return low ^ (block // n_sets) % n_sets if xor_hash else low


class NaiveLru:
    """Per-set LRU list, most recent at the end. Loads allocate, stores do not."""

    def __init__(self, n_sets: int, ways: int, line_bytes: int = 128, xor_hash: bool = True):
        self.n_sets, self.ways, self.line, self.xor = n_sets, ways, line_bytes, xor_hash
        self.sets: List[List[int]] = [[] for _ in range(n_sets)]

    def access(self, addr: int, is_store: bool = False) -> bool:
        block = addr // self.line
        lst = self.sets[arith_set_index(block, self.n_sets, self.xor)]
        if block in lst:
            lst.remove(block)
            lst.append(block)
            return True
        if not is_store:
            if len(lst) == self.ways:
                lst.pop(0)
            lst.append(block)
        return False


class NaiveDirectMapped:
    def __init__(self, n_slots: int):
        self.slots: List[Optional[int]] = [None] * n_slots

    def access(self, block: int, slot: int) -> bool:
        hit = self.slots[slot] == block
        self.slots[slot] = block
        return hit


# interference-list protocol written out as a literal table:
# (counter, same_warp) -> (new_counter, replace_interferer)
COUNTER_TABLE: Dict[Tuple[int, bool], Tuple[int, bool]] = {
    (0, True): (1, False),
    (1, True): (2, False),
    (2, True): (3, False),
    (3, True): (3, False),
    (3, False): (2, False),
    (2, False): (1, False),
    (1, False): (0, True),
    (0, False): (0, True),
}


class NaiveVta:
    """Per-warp FIFO of (block, evictor); a hit removes the matching entry."""

    def __init__(self, n_warps: int, depth: int):
        self.depth = depth
        self.fifo: List[List[Tuple[int, int]]] = [[] for _ in range(n_warps)]

    def evict(self, owner: int, block: int, evictor: int) -> None:
        f = self.fifo[owner]
        f.append((block, evictor))
        if len(f) > self.depth:
            del f[0]

    def check(self, warp: int, block: int) -> Optional[int]:
        f = self.fifo[warp]
        for i, (b, e) in enumerate(f):
            if b == block:
                del f[i]
                return e
        return None


def irs_oracle(vta_hits: int, inst_total: int, active: int) -> Fraction:
    """VTA hits divided by the per-warp average instruction count."""
    return Fraction(vta_hits) / (Fraction(inst_total) / Fraction(active))


def field_location(addr: int) -> Tuple[int, int, int, int]:
    """(F, B, G, R-bits) of a 16-bit address slice by string slicing."""
    return bits(addr, 0, 3), bits(addr, 3, 4), bits(addr, 7, 1), bits(addr, 8, 8)


def thrash_pair_oracle(trace: Sequence, isolated: Iterable[int], l1d_sets: int,
                       l1d_ways: int, smem_slots: int) -> Dict[int, List[bool]]:
    """Per-warp hit sequences when ``isolated`` warps use a private
    direct-mapped cache and everyone else shares an LRU L1D."""
    iso = set(isolated)
    l1 = NaiveLru(l1d_sets, l1d_ways)
    sm = NaiveDirectMapped(smem_slots)
    hits: Dict[int, List[bool]] = {}
    for r in trace:
        if r.addr is None:
            continue
        block = r.addr // 128
        if r.warp in iso:
            h = sm.access(block, block % smem_slots)
        else:
            h = l1.access(r.addr)
        hits.setdefault(r.warp, []).append(h)
    return hits


def steady(seq: Sequence[bool], fraction: float = 0.5) -> float:
    tail = seq[int(len(seq) * fraction):]
    return sum(tail) / len(tail) if tail else 0.0
