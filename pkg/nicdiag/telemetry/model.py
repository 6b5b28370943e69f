from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from nicdiag.errors import TelemetryValidationError

EndpointKind = Literal["compute", "switch"]
ENDPOINT_KINDS: tuple[EndpointKind, ...] = ("compute", "switch")
LOG_LEVELS = ("INFO", "WARN", "ERROR")


@dataclass(frozen=True, order=True)
class TopologyEntry:
    node: str
    nic: str
    link: str
    link_port: str


@dataclass(frozen=True)
class Topology:
    entries: tuple[TopologyEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen_nics: dict[tuple[str, str], int] = {}
        seen_ports: dict[tuple[str, str], int] = {}
        dup_nics: list[str] = []
        dup_ports: list[str] = []
        for entry in self.entries:
            nic_key = (entry.node, entry.nic)
            port_key = (entry.link, entry.link_port)
            if nic_key in seen_nics:
                dup_nics.append(f"{entry.node}/{entry.nic}")
            if port_key in seen_ports:
                dup_ports.append(f"{entry.link}/{entry.link_port}")
            seen_nics[nic_key] = seen_nics.get(nic_key, 0) + 1
            seen_ports[port_key] = seen_ports.get(port_key, 0) + 1
        if dup_nics:
            raise TelemetryValidationError("duplicate (node, nic) in topology", dup_nics)
        if dup_ports:
            raise TelemetryValidationError("switch port connected to more than one NIC", dup_ports)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def compute_nodes(self) -> list[str]:
        return sorted({e.node for e in self.entries})

    @property
    def switches(self) -> list[str]:
        return sorted({e.link for e in self.entries})


@dataclass(frozen=True, order=True)
class Endpoint:
    """One side of a NIC pair: a compute NIC or a switch port."""

    kind: EndpointKind
    device: str
    port: str

    def label(self) -> str:
        return f"{self.kind}:{self.device}/{self.port}"


@dataclass(frozen=True)
class NicPair:
    id: int
    compute_node: str
    compute_nic: str
    switch: str
    switch_port: str

    @property
    def compute(self) -> Endpoint:
        return Endpoint("compute", self.compute_node, self.compute_nic)

    @property
    def switch_side(self) -> Endpoint:
        return Endpoint("switch", self.switch, self.switch_port)

    def endpoint(self, kind: EndpointKind) -> Endpoint:
        return self.compute if kind == "compute" else self.switch_side


def derive_nic_pairs(topology: Topology) -> list[NicPair]:
    ordered = sorted(topology.entries, key=lambda e: (e.node, e.nic))
    return [
        NicPair(id=i, compute_node=e.node, compute_nic=e.nic, switch=e.link, switch_port=e.link_port)
        for i, e in enumerate(ordered)
    ]


@dataclass(frozen=True, eq=False)
class MetricSeries:
    owner: Endpoint
    metric: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.int64)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise TelemetryValidationError("timestamps and values must be 1-D and equal length", [self.key_label()])
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise TelemetryValidationError("timestamps not strictly increasing", [self.key_label()])
        if np.any(vals < 0):
            raise TelemetryValidationError("negative cumulative counter value", [self.key_label()])
        ts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    @property
    def key(self) -> tuple[Endpoint, str]:
        return (self.owner, self.metric)

    def key_label(self) -> str:
        return f"{self.owner.label()}:{self.metric}"

    def __len__(self) -> int:
        return int(self.timestamps.size)


MetricTable = dict[tuple[Endpoint, str], MetricSeries]


def index_series(series: Iterable[MetricSeries]) -> MetricTable:
    table: MetricTable = {}
    for s in series:
        if s.key in table:
            raise TelemetryValidationError("duplicate metric series", [s.key_label()])
        table[s.key] = s
    return table


@dataclass(frozen=True)
class LogRecord:
    timestamp: float
    owner: str
    level: str
    message: str

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise TelemetryValidationError("log timestamp must be finite", [self.owner])
        if self.level not in LOG_LEVELS:
            raise TelemetryValidationError(f"log level must be one of {LOG_LEVELS}", [self.level])
        if not self.message.strip():
            raise TelemetryValidationError("log message must be non-empty", [self.owner])


@dataclass(frozen=True, eq=False)
class PairSlice:
    """Differenced counters and logs of one NIC pair inside one window."""

    pair: NicPair
    compute: dict[str, np.ndarray]
    switch: dict[str, np.ndarray]
    logs: tuple[LogRecord, ...]
    resets: frozenset[tuple[EndpointKind, str]] = frozenset()

    def side(self, kind: EndpointKind) -> dict[str, np.ndarray]:
        return self.compute if kind == "compute" else self.switch


@dataclass(frozen=True, eq=False)
class Window:
    start: int
    length: int
    slices: dict[int, PairSlice] = field(default_factory=dict)
    window_id: str = ""

    @property
    def end(self) -> int:
        return self.start + self.length
