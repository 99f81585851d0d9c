"""Trace-driven single-SM GPU cache and warp-scheduling simulator."""

from .config import (ConfigError, Kind, Policy, SimConfig, Space, TraceRecord,
                     block_align, block_index, default_config, load_config,
                     parse_config_text)
from .engine import MalformedTrace, SimStats, run, run_matrix, write_reports
from .workloads import (Infeasible, InvalidRatio, ParseError, gen_class, gen_thrash,
                        read_trace, write_trace)

__all__ = [
    "ConfigError", "Infeasible", "InvalidRatio", "Kind", "MalformedTrace",
    "ParseError", "Policy", "SimConfig", "SimStats", "Space", "TraceRecord",
    "block_align", "block_index", "default_config", "gen_class", "gen_thrash",
    "load_config", "parse_config_text", "read_trace", "run", "run_matrix",
    "write_reports", "write_trace",
]
