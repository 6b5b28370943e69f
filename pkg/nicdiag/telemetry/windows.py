from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from nicdiag.errors import TelemetryValidationError
from nicdiag.telemetry.model import (
    ENDPOINT_KINDS,
    EndpointKind,
    LogRecord,
    MetricTable,
    NicPair,
    PairSlice,
    Window,
)

DEFAULT_WINDOW_LENGTH = 3600

_EMPTY = np.zeros(0, dtype=np.int64)


def difference(values: np.ndarray) -> tuple[np.ndarray, bool]:
    """
    First differences of a cumulative counter. A decrease (register wrap/reset) yields 0
    and sets the returned flag.
    """
    vals = np.asarray(values, dtype=np.int64)
    if vals.size < 2:
        return _EMPTY, False
    diffs = np.diff(vals)
    reset = bool(np.any(diffs < 0))
    if reset:
        diffs = np.where(diffs < 0, 0, diffs)
    return diffs, reset


def _metrics_by_owner(series: MetricTable) -> dict:
    grouped: dict = {}
    for (owner, metric), s in series.items():
        grouped.setdefault(owner, {})[metric] = s
    return grouped


def slice_windows(
    series: MetricTable,
    logs: Iterable[LogRecord],
    pairs: Sequence[NicPair],
    start: int,
    length: int = DEFAULT_WINDOW_LENGTH,
    window_id: str = "",
) -> Window:
    if length <= 0:
        raise TelemetryValidationError("window length must be positive", [str(length)])
    end = start + length
    by_owner = _metrics_by_owner(series)

    logs_by_node: dict[str, list[LogRecord]] = {}
    for record in logs:
        if start <= record.timestamp < end:
            logs_by_node.setdefault(record.owner, []).append(record)
    for records in logs_by_node.values():
        records.sort(key=lambda r: (r.timestamp, r.level, r.message))

    slices: dict[int, PairSlice] = {}
    for pair in pairs:
        sides: dict[EndpointKind, dict[str, np.ndarray]] = {}
        resets: set[tuple[EndpointKind, str]] = set()
        for kind in ENDPOINT_KINDS:
            owned = by_owner.get(pair.endpoint(kind), {})
            side: dict[str, np.ndarray] = {}
            for metric in sorted(owned):
                s = owned[metric]
                mask = (s.timestamps >= start) & (s.timestamps < end)
                diffs, reset = difference(s.values[mask])
                if reset:
                    resets.add((kind, metric))
                side[metric] = diffs
            sides[kind] = side
        slices[pair.id] = PairSlice(
            pair=pair,
            compute=sides["compute"],
            switch=sides["switch"],
            logs=tuple(logs_by_node.get(pair.compute_node, ())),
            resets=frozenset(resets),
        )
    return Window(start=start, length=length, slices=slices, window_id=window_id or str(start))
