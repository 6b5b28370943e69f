from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from nicdiag.errors import TelemetryValidationError
from nicdiag.simulator.profiles import CounterSpec, WorkloadProfile, counters_for
from nicdiag.telemetry.model import (
    ENDPOINT_KINDS,
    Endpoint,
    LogRecord,
    MetricSeries,
    MetricTable,
    NicPair,
    Topology,
    Window,
    derive_nic_pairs,
)
from nicdiag.telemetry.windows import DEFAULT_WINDOW_LENGTH, slice_windows

DEFAULT_INTERVAL = 60
HEARTBEAT_PERIOD = 600
JOB_STEP_PERIOD = 300
COUNTER_OFFSET_MAX = 10**9


@dataclass(frozen=True, eq=False)
class TelemetryBundle:
    """Cumulative counters and node logs for one cluster over [start, start + horizon)."""

    topology: Topology
    series: MetricTable
    logs: tuple[LogRecord, ...]
    start: int
    horizon: int
    interval: int = DEFAULT_INTERVAL

    @property
    def end(self) -> int:
        return self.start + self.horizon

    @property
    def pairs(self) -> list[NicPair]:
        return derive_nic_pairs(self.topology)

    def restrict(self, start: int, end: int) -> "TelemetryBundle":
        series: MetricTable = {}
        for key, s in self.series.items():
            mask = (s.timestamps >= start) & (s.timestamps < end)
            series[key] = MetricSeries(s.owner, s.metric, s.timestamps[mask], s.values[mask])
        logs = tuple(r for r in self.logs if start <= r.timestamp < end)
        return replace(self, series=series, logs=logs, start=start, horizon=end - start)

    def window(self, start: int, length: int, window_id: str = "") -> Window:
        return slice_windows(self.series, self.logs, self.pairs, start, length, window_id)


def _background_logs(
    pairs: list[NicPair], timestamps: np.ndarray, interval: int, rng: np.random.Generator
) -> list[LogRecord]:
    """Periodic heartbeat and job-step lines per node, plus one link-up line at job start."""
    start, end = int(timestamps[0]), int(timestamps[-1]) + interval
    records: list[LogRecord] = []
    for pair in pairs:
        node = pair.compute_node
        records.append(
            LogRecord(float(start + rng.integers(0, interval)), node, "INFO", f"Link {pair.compute_nic} state UP speed 100000 Mb/s")
        )
        for ts in range(start + int(rng.integers(0, HEARTBEAT_PERIOD)), end, HEARTBEAT_PERIOD):
            records.append(LogRecord(float(ts), node, "INFO", f"Heartbeat from monitor agent {int(rng.integers(1, 64))} ok"))
        step = int(rng.integers(1, 1000))
        for ts in range(start + int(rng.integers(0, JOB_STEP_PERIOD)), end, JOB_STEP_PERIOD):
            step += 1
            records.append(
                LogRecord(float(ts), node, "INFO", f"Job step {step} finished in {int(rng.integers(50, 9000))} ms")
            )
    records.sort(key=lambda r: (r.timestamp, r.owner, r.level, r.message))
    return records


def _counter_increments(
    spec: CounterSpec, load: np.ndarray, noise: np.ndarray
) -> np.ndarray:
    if spec.traffic_share == 0.0:
        return np.zeros(load.size, dtype=np.int64)
    return np.rint(np.clip(spec.traffic_share * (load + noise), 0.0, None)).astype(np.int64)


def generate_baseline(
    topology: Topology,
    profile: WorkloadProfile,
    horizon: int,
    seed: int,
    start: int = 0,
    interval: int = DEFAULT_INTERVAL,
    window_length: int = DEFAULT_WINDOW_LENGTH,
) -> TelemetryBundle:
    """
    Failure-free job telemetry: every endpoint carries baseline traffic plus synchronized
    square-wave bursts and Gaussian noise; error and pause counters stay at zero.
    """
    if horizon < 2 * window_length:
        raise TelemetryValidationError(f"horizon {horizon}s is shorter than two {window_length}s windows")
    rng = np.random.default_rng(seed)
    timestamps = start + interval * np.arange(horizon // interval, dtype=np.int64)
    in_burst = ((timestamps - start) % profile.burst_period) < profile.burst_duty * profile.burst_period
    # job load per sample interval; profile rates are per minute
    load = (profile.baseline_rate + profile.burst_amplitude * in_burst.astype(np.float64)) * (interval / 60.0)
    pairs = derive_nic_pairs(topology)

    series: MetricTable = {}
    for pair in pairs:
        for kind in ENDPOINT_KINDS:
            owner: Endpoint = pair.endpoint(kind)
            noise = rng.normal(0.0, profile.noise_std, size=timestamps.size) if profile.noise_std else np.zeros(timestamps.size)
            for spec in counters_for(kind):
                increments = _counter_increments(spec, load, noise)
                offset = int(rng.integers(0, COUNTER_OFFSET_MAX))
                values = offset + np.cumsum(increments)
                s = MetricSeries(owner, spec.name, timestamps, values)
                series[s.key] = s

    logs = _background_logs(pairs, timestamps, interval, rng) if len(timestamps) else []
    return TelemetryBundle(topology, series, tuple(logs), start, horizon, interval)
