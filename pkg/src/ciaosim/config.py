"""Core types, simulator configuration and address arithmetic."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union


class Kind(enum.Enum):
    ALU = "A"
    LOAD = "L"
    STORE = "S"


class Space(enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


class Policy(enum.Enum):
    GTO = "gto"
    BEST_SWL = "best-swl"
    CCWS_LITE = "ccws-lite"
    CIAO_T = "ciao-t"
    CIAO_P = "ciao-p"
    CIAO_C = "ciao-c"

    @property
    def uses_smem(self) -> bool:
        return self in (Policy.CIAO_P, Policy.CIAO_C)

    @property
    def is_ciao(self) -> bool:
        return self in (Policy.CIAO_T, Policy.CIAO_P, Policy.CIAO_C)

    @classmethod
    def parse(cls, name: Union[str, "Policy"]) -> "Policy":
        if isinstance(name, Policy):
            return name
        try:
            return cls(name.strip().lower().replace("_", "-"))
        except ValueError:
            raise ValueError(f"unknown policy {name!r}") from None


@dataclass(frozen=True, slots=True)
class TraceRecord:
    """One warp instruction. ``addr`` is set iff the record is a load or store."""

    warp: int
    kind: Kind
    addr: Optional[int] = None
    space: Space = Space.GLOBAL

    def __post_init__(self):
        if self.kind is Kind.ALU:
            if self.addr is not None:
                raise ValueError("ALU record carries no address")
        elif self.addr is None or self.addr < 0:
            raise ValueError(f"{self.kind.name} record needs a non-negative address")
        if self.warp < 0:
            raise ValueError("negative warp id")

    @property
    def is_mem(self) -> bool:
        return self.kind is not Kind.ALU


class ConfigError(ValueError):
    """Base class for rejected configurations."""


class SetCountError(ConfigError):
    pass


class LineSizeError(ConfigError):
    pass


class SmemLayoutError(ConfigError):
    pass


class CutoffOrderError(ConfigError):
    pass


class EpochOrderError(ConfigError):
    pass


class CapacityError(ConfigError):
    pass


# Bytes per shared-memory bank word; the cache datapath reads 64 bits per bank.
SMEM_WORD_BYTES = 8


@dataclass(frozen=True)
class SimConfig:
    l1d_size_bytes: int = 16 * 1024
    l1d_ways: int = 4
    line_bytes: int = 128
    xor_hash: bool = True
    smem_total_bytes: int = 48 * 1024
    smem_banks: int = 32
    # rows of 8-byte bank words; 48KB / (32 banks * 8B) = 192
    smem_rows_per_bank: int = 192
    # fraction of shared-memory rows reserved by CTAs (F_smem)
    smem_cta_fraction: float = 0.0
    vta_entries_per_warp: int = 8
    vta_sets: int = 48
    high_cutoff: float = 0.01
    low_cutoff: float = 0.005
    high_epoch_insts: int = 5000
    low_epoch_insts: int = 100
    irs_windowed: bool = False
    pair_list_overwrite: bool = False
    l2_hit_latency_cycles: int = 120
    dram_latency_cycles: int = 220
    l2_miss_ratio: float = 0.0
    mem_port_cycles: int = 2
    response_queue_latency_cycles: int = 1
    mshr_entries: int = 32
    max_warps: int = 48
    scheduler: Policy = Policy.GTO
    best_swl_limit: Optional[int] = None
    ccws_hit_points: int = 8
    ccws_base_score: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scheduler", Policy.parse(self.scheduler))
        validate(self)

    @property
    def l1d_sets(self) -> int:
        return self.l1d_size_bytes // (self.l1d_ways * self.line_bytes)

    @property
    def line_shift(self) -> int:
        return self.line_bytes.bit_length() - 1

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def _pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def validate(cfg: SimConfig) -> None:
    """Raise a `ConfigError` subclass naming the first violated constraint."""
    if not _pow2(cfg.line_bytes):
        raise LineSizeError(f"line_bytes={cfg.line_bytes} is not a power of two")
    if cfg.line_bytes != 128:
        raise LineSizeError("the shared-memory cache layout requires 128-byte lines")
    if cfg.l1d_ways <= 0 or cfg.l1d_size_bytes % (cfg.l1d_ways * cfg.line_bytes):
        raise SetCountError("l1d_size_bytes must be a multiple of ways * line_bytes")
    if not _pow2(cfg.l1d_sets):
        raise SetCountError(f"L1D set count {cfg.l1d_sets} is not a power of two")
    if cfg.smem_banks != 32:
        raise SmemLayoutError("smem_banks must be 32 (two 16-bank groups)")
    if cfg.smem_rows_per_bank * cfg.smem_banks * SMEM_WORD_BYTES != cfg.smem_total_bytes:
        raise SmemLayoutError(
            "smem_rows_per_bank * smem_banks * 8 must equal smem_total_bytes")
    if cfg.smem_rows_per_bank > 256:
        raise SmemLayoutError("row index field is 8 bits: at most 256 rows")
    if not 0.0 <= cfg.smem_cta_fraction <= 1.0:
        raise SmemLayoutError("smem_cta_fraction must lie in [0, 1]")
    if not cfg.high_cutoff > cfg.low_cutoff > 0:
        raise CutoffOrderError("require high_cutoff > low_cutoff > 0")
    if not cfg.high_epoch_insts > cfg.low_epoch_insts > 0:
        raise EpochOrderError("require high_epoch_insts > low_epoch_insts > 0")
    if not 0.0 <= cfg.l2_miss_ratio <= 1.0:
        raise CapacityError("l2_miss_ratio must lie in [0, 1]")
    if cfg.mshr_entries <= 0:
        raise CapacityError("mshr_entries must be positive")
    if not 0 < cfg.max_warps <= 64:
        # interference and pair list entries hold 6-bit warp ids
        raise CapacityError("max_warps must be in 1..64")
    if cfg.vta_entries_per_warp <= 0 or cfg.vta_sets < cfg.max_warps:
        raise CapacityError("VTA needs >= 1 entry per set and one set per warp")
    if cfg.best_swl_limit is not None and cfg.best_swl_limit <= 0:
        raise CapacityError("best_swl_limit must be positive")


def default_config(**overrides) -> SimConfig:
    """GTX480-like single-SM profile."""
    return SimConfig(**overrides)


def block_index(addr: int, cfg: SimConfig) -> int:
    return addr >> cfg.line_shift


def block_align(addr: int, cfg: SimConfig) -> int:
    return addr & ~(cfg.line_bytes - 1)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimConfig)}


def _coerce(name: str, raw: str):
    t = _FIELD_TYPES[name]
    raw = raw.strip()
    if name == "scheduler":
        return Policy.parse(raw)
    if t == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {raw!r}")
    if t == "Optional[int]":
        return None if raw.lower() in ("", "none") else int(raw, 0)
    if t == "int":
        return int(raw, 0)
    if t == "float":
        return float(raw)
    raise TypeError(f"unsupported field type for {name}")


def parse_config_text(text: str, base: Optional[SimConfig] = None) -> SimConfig:
    """Parse flat ``key = value`` text; unknown keys are an error."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    base = base or SimConfig()
    return dataclasses.replace(base, **values)


def load_config(path: Union[str, Path]) -> SimConfig:
    return parse_config_text(Path(path).read_text())


def dump_config(cfg: SimConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, Policy):
            v = v.value
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
