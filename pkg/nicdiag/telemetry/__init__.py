from nicdiag.telemetry.io import load_logs, load_metrics, load_topology, write_logs, write_metrics, write_topology
from nicdiag.telemetry.model import (
    Endpoint,
    LogRecord,
    MetricSeries,
    MetricTable,
    NicPair,
    PairSlice,
    Topology,
    TopologyEntry,
    Window,
    derive_nic_pairs,
    index_series,
)
from nicdiag.telemetry.windows import DEFAULT_WINDOW_LENGTH, difference, slice_windows

__all__ = [
    "DEFAULT_WINDOW_LENGTH",
    "Endpoint",
    "LogRecord",
    "MetricSeries",
    "MetricTable",
    "NicPair",
    "PairSlice",
    "Topology",
    "TopologyEntry",
    "Window",
    "derive_nic_pairs",
    "difference",
    "index_series",
    "load_logs",
    "load_metrics",
    "load_topology",
    "slice_windows",
    "write_logs",
    "write_metrics",
    "write_topology",
]
