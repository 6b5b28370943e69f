from nicdiag.evaluation.metrics import (
    EvalReport,
    MatchMode,
    TestCase,
    ac_at_k,
    avg_at_k,
    build_report,
    format_reports,
    write_reports,
)
from nicdiag.evaluation.protocols import PROTOCOLS, ProtocolConfig, load_protocol_config, run_protocol

__all__ = [
    "EvalReport",
    "MatchMode",
    "PROTOCOLS",
    "ProtocolConfig",
    "TestCase",
    "ac_at_k",
    "avg_at_k",
    "build_report",
    "format_reports",
    "load_protocol_config",
    "run_protocol",
    "write_reports",
]
