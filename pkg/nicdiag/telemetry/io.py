from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import pandas as pd

from nicdiag.errors import TelemetryParseError, TelemetryValidationError
from nicdiag.telemetry.model import (
    ENDPOINT_KINDS,
    Endpoint,
    LogRecord,
    MetricSeries,
    MetricTable,
    Topology,
    TopologyEntry,
)

TOPOLOGY_KEYS = ("node", "nic", "link", "link_port")
METRICS_COLUMNS = ["timestamp", "owner_kind", "owner_id", "nic_or_port", "metric", "value"]


def _iter_json_array(text: str, path: Path) -> Iterator[tuple[int, object]]:
    """Yield (line number, element) for each element of a top-level JSON array."""
    decoder = json.JSONDecoder()
    idx = 0
    n = len(text)

    def skip_ws(i: int) -> int:
        while i < n and text[i] in " \t\r\n":
            i += 1
        return i

    def line_at(i: int) -> int:
        return text.count("\n", 0, i) + 1

    idx = skip_ws(idx)
    if idx >= n or text[idx] != "[":
        raise TelemetryParseError(path, line_at(idx), "topology file must be a JSON array")
    idx = skip_ws(idx + 1)
    if idx < n and text[idx] == "]":
        return
    while True:
        try:
            obj, end = decoder.raw_decode(text, idx)
        except json.JSONDecodeError as exc:
            raise TelemetryParseError(path, exc.lineno, exc.msg) from exc
        yield line_at(idx), obj
        idx = skip_ws(end)
        if idx < n and text[idx] == ",":
            idx = skip_ws(idx + 1)
            continue
        if idx < n and text[idx] == "]":
            break
        raise TelemetryParseError(path, line_at(idx), "expected ',' or ']' between topology records")
    if skip_ws(idx + 1) != n:
        raise TelemetryParseError(path, line_at(idx + 1), "trailing data after topology array")


def load_topology(path: Path) -> Topology:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    entries: list[TopologyEntry] = []
    for line, obj in _iter_json_array(text, path):
        if not isinstance(obj, dict) or set(obj) != set(TOPOLOGY_KEYS):
            raise TelemetryParseError(path, line, f"record must have exactly the keys {', '.join(TOPOLOGY_KEYS)}")
        if not all(isinstance(obj[k], str) and obj[k] for k in TOPOLOGY_KEYS):
            raise TelemetryParseError(path, line, "topology values must be non-empty strings")
        entries.append(TopologyEntry(**{k: obj[k] for k in TOPOLOGY_KEYS}))
    return Topology(tuple(entries))


def write_topology(topology: Topology, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = [{k: getattr(e, k) for k in TOPOLOGY_KEYS} for e in topology.entries]
    path.write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")


def _known_owners(topology: Topology) -> set[Endpoint]:
    owners: set[Endpoint] = set()
    for e in topology.entries:
        owners.add(Endpoint("compute", e.node, e.nic))
        owners.add(Endpoint("switch", e.link, e.link_port))
    return owners


def load_metrics(path: Path, topology: Topology) -> MetricTable:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as exc:
        raise TelemetryParseError(path, 0, str(exc)) from exc
    except pd.errors.EmptyDataError as exc:
        raise TelemetryParseError(path, 1, "metrics file is empty") from exc
    if list(frame.columns) != METRICS_COLUMNS:
        raise TelemetryParseError(path, 1, f"header must be {','.join(METRICS_COLUMNS)}")

    for column in ("timestamp", "value"):
        numeric = pd.to_numeric(frame[column], errors="coerce")
        bad = numeric.isna() | (numeric != numeric.round())
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise TelemetryParseError(path, row + 2, f"{column} must be an integer")
        frame[column] = numeric.astype(np.int64)
    bad_kind = ~frame["owner_kind"].isin(ENDPOINT_KINDS)
    if bad_kind.any():
        row = int(np.flatnonzero(bad_kind.to_numpy())[0])
        raise TelemetryParseError(path, row + 2, "owner_kind must be compute or switch")

    known = _known_owners(topology)
    series: MetricTable = {}
    unknown: set[str] = set()
    non_monotone: list[str] = []
    grouped = frame.groupby(["owner_kind", "owner_id", "nic_or_port", "metric"], sort=True)
    for (kind, owner_id, port, metric), group in grouped:
        owner = Endpoint(kind, owner_id, port)
        if owner not in known:
            unknown.add(f"{owner_id}/{port}")
            continue
        ts = group["timestamp"].to_numpy()
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            non_monotone.append(f"{owner.label()}:{metric}")
            continue
        s = MetricSeries(owner=owner, metric=metric, timestamps=ts, values=group["value"].to_numpy())
        series[s.key] = s
    if unknown:
        raise TelemetryValidationError("metrics reference owners absent from the topology", sorted(unknown))
    if non_monotone:
        raise TelemetryValidationError("non-monotone timestamps", non_monotone)
    return series


def write_metrics(series: Iterable[MetricSeries], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = []
    for s in sorted(series, key=lambda s: (s.owner, s.metric)):
        n = len(s)
        frames.append(
            pd.DataFrame(
                {
                    "timestamp": s.timestamps,
                    "owner_kind": [s.owner.kind] * n,
                    "owner_id": [s.owner.device] * n,
                    "nic_or_port": [s.owner.port] * n,
                    "metric": [s.metric] * n,
                    "value": s.values,
                }
            )
        )
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=METRICS_COLUMNS)
    frame.to_csv(path, index=False, columns=METRICS_COLUMNS, lineterminator="\n")


def load_logs(path: Path) -> list[LogRecord]:
    path = Path(path)
    records: list[LogRecord] = []
    with path.open("r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 3)
            if len(parts) != 4:
                raise TelemetryParseError(path, line_no, "expected timestamp, node, level, message separated by tabs")
            ts_raw, node, level, message = parts
            try:
                timestamp = float(ts_raw)
            except ValueError as exc:
                raise TelemetryParseError(path, line_no, f"bad timestamp {ts_raw!r}") from exc
            try:
                records.append(LogRecord(timestamp=timestamp, owner=node, level=level, message=message))
            except TelemetryValidationError as exc:
                raise TelemetryParseError(path, line_no, str(exc)) from exc
    return records


def _format_ts(ts: float) -> str:
    return str(int(ts)) if float(ts).is_integer() else repr(float(ts))


def write_logs(records: Iterable[LogRecord], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(f"{_format_ts(r.timestamp)}\t{r.owner}\t{r.level}\t{r.message}\n")
