from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from nicdiag.diagnosis.states import StateLabel
from nicdiag.errors import TelemetryValidationError
from nicdiag.simulator.profiles import COUNTER_BY_NAME
from nicdiag.simulator.telemetry import TelemetryBundle
from nicdiag.telemetry.model import Endpoint, LogRecord, MetricSeries, MetricTable, NicPair, Window
from nicdiag.telemetry.windows import DEFAULT_WINDOW_LENGTH

VICTIM_FACTOR = 0.5
F3_VICTIM_DAMPING = 0.7
F4_TX_DIP = 0.85
LOG_BURST_SECONDS = 300.0

TX_TRAFFIC = ("tx_packets_phy", "tx_bytes_phy", "tx_unicast_packets")
TRAFFIC = TX_TRAFFIC + ("rx_packets_phy", "rx_bytes_phy", "rx_unicast_packets")

# (endpoint side, counter) raised on the culprit for each failure type
CULPRIT_SYMPTOMS: dict[StateLabel, tuple[tuple[str, str], ...]] = {
    StateLabel.F1: (("compute", "rx_crc_errors_phy"),),
    StateLabel.F2: (("compute", "tx_prio_pause"),),
    StateLabel.F3: (("switch", "rx_prio_pause"),),
    StateLabel.F4: (),
    StateLabel.F5: (("compute", "rx_prio_discards"), ("switch", "rx_prio_discards")),
    StateLabel.F6: (("switch", "rx_discards_phy"),),
    StateLabel.F7: (("compute", "tx_discards_phy"),),
}


@dataclass(frozen=True)
class InjectionSpec:
    failure_type: StateLabel
    culprit_pair: int
    onset: int
    duration: int
    intensity: float
    job_pairs: tuple[int, ...] | None = None

    def __post_init__(self):
        if not StateLabel(self.failure_type).is_failure:
            raise TelemetryValidationError(f"{StateLabel(self.failure_type).text} is not an injectable failure type")
        if self.duration <= 0:
            raise TelemetryValidationError("injection duration must be positive")
        if self.intensity < 1.0:
            raise TelemetryValidationError("injection intensity must be at least 1")


@dataclass(frozen=True, eq=False)
class LabeledSample:
    sample_id: str
    profile: str
    bundle: TelemetryBundle
    labels: dict[int, StateLabel]
    window_start: int
    window_length: int = DEFAULT_WINDOW_LENGTH
    spec: InjectionSpec | None = None
    effective: bool = True

    @property
    def is_normal(self) -> bool:
        return self.spec is None

    @property
    def failure_type(self) -> StateLabel | None:
        return None if self.spec is None else self.spec.failure_type

    @property
    def culprit(self) -> int | None:
        return None if self.spec is None else self.spec.culprit_pair

    @property
    def pairs(self) -> list[NicPair]:
        return self.bundle.pairs

    def window(self) -> Window:
        return self.bundle.window(self.window_start, self.window_length, self.sample_id)


def _transform(
    series: MetricTable,
    owner: Endpoint,
    metric: str,
    start: int,
    end: int,
    factor: float,
    unit: float = 0.0,
) -> bool:
    """Rewrite per-interval increments inside [start, end) as d*factor + (factor-1)*unit."""
    key = (owner, metric)
    s = series.get(key)
    if s is None or len(s) < 2:
        return False
    increments = np.diff(s.values).astype(np.float64)
    hit = (s.timestamps[1:] >= start) & (s.timestamps[1:] < end)
    if not hit.any():
        return False
    changed = increments.copy()
    changed[hit] = np.clip(np.rint(increments[hit] * factor + (factor - 1.0) * unit), 0.0, None)
    values = s.values[0] + np.concatenate(([0], np.cumsum(changed.astype(np.int64))))
    series[key] = MetricSeries(owner, metric, s.timestamps, values)
    return not np.array_equal(changed, increments)


def _error_logs(
    failure: StateLabel, pair: NicPair, spec: InjectionSpec, rng: np.random.Generator
) -> list[LogRecord]:
    if failure not in (StateLabel.F1, StateLabel.F4) or spec.intensity <= 1.0:
        return []
    n = int(rng.poisson((spec.intensity - 1.0) * spec.duration / LOG_BURST_SECONDS)) + 1
    records = []
    for _ in range(n):
        ts = float(rng.integers(spec.onset, spec.onset + spec.duration))
        if failure is StateLabel.F1:
            message = f"CRC Error on port {int(rng.integers(1, 9))} lane {int(rng.integers(0, 4))}"
        else:
            message = (
                f"Tx Timeout on queue {int(rng.integers(0, 16))} of {pair.compute_nic} "
                f"after {int(rng.integers(1000, 8000))} ms"
            )
        records.append(LogRecord(ts, pair.compute_node, "ERROR", message))
    return records


def inject_failure(
    bundle: TelemetryBundle,
    spec: InjectionSpec,
    seed: int,
    sample_id: str = "",
    profile: str = "",
    window_length: int = DEFAULT_WINDOW_LENGTH,
) -> LabeledSample:
    """Apply one failure to `bundle` and label every pair; the sample keeps the last window."""
    pairs = {p.id: p for p in bundle.pairs}
    if spec.culprit_pair not in pairs:
        raise TelemetryValidationError("culprit pair not in topology", [str(spec.culprit_pair)])
    if spec.onset < bundle.start or spec.onset + spec.duration > bundle.end:
        raise TelemetryValidationError("injection falls outside the generated horizon", [sample_id or "spec"])
    job = tuple(sorted(pairs)) if spec.job_pairs is None else tuple(sorted(set(spec.job_pairs)))
    unknown = [str(p) for p in job if p not in pairs]
    if unknown:
        raise TelemetryValidationError("job references unknown pairs", unknown)
    if spec.culprit_pair not in job:
        job = tuple(sorted(job + (spec.culprit_pair,)))

    rng = np.random.default_rng(seed)
    failure = StateLabel(spec.failure_type)
    culprit = pairs[spec.culprit_pair]
    start, end = spec.onset, spec.onset + spec.duration
    f = float(spec.intensity)
    series = dict(bundle.series)

    changed = False
    for kind, metric in CULPRIT_SYMPTOMS[failure]:
        unit = COUNTER_BY_NAME[metric].symptom_unit
        changed |= _transform(series, culprit.endpoint(kind), metric, start, end, f, unit)
    if failure is StateLabel.F4 and f > 1.0:
        for metric in TX_TRAFFIC:
            changed |= _transform(series, culprit.compute, metric, start, end, F4_TX_DIP)

    victim_factor = max(1.0, VICTIM_FACTOR * f)
    pause_unit = COUNTER_BY_NAME["rx_prio_pause"].symptom_unit
    for pid in job:
        if pid == culprit.id:
            continue
        victim = pairs[pid]
        _transform(series, victim.compute, "rx_prio_pause", start, end, victim_factor, pause_unit)
        if failure is StateLabel.F3 and f > 1.0:
            for metric in TRAFFIC:
                _transform(series, victim.compute, metric, start, end, F3_VICTIM_DAMPING)

    extra = _error_logs(failure, culprit, spec, rng)
    logs = tuple(sorted(bundle.logs + tuple(extra), key=lambda r: (r.timestamp, r.owner, r.level, r.message)))

    labels = {
        pid: (failure if pid == culprit.id else StateLabel.VICTIM if pid in job else StateLabel.NORMAL)
        for pid in sorted(pairs)
    }
    window_start = bundle.end - window_length
    injected = replace(bundle, series=series, logs=logs).restrict(window_start, bundle.end)
    return LabeledSample(
        sample_id=sample_id,
        profile=profile,
        bundle=injected,
        labels=labels,
        window_start=window_start,
        window_length=window_length,
        spec=replace(spec, job_pairs=job),
        effective=f > 1.0 and (changed or bool(extra)),
    )


def normal_sample(
    bundle: TelemetryBundle, sample_id: str = "", profile: str = "", window_length: int = DEFAULT_WINDOW_LENGTH
) -> LabeledSample:
    window_start = bundle.end - window_length
    return LabeledSample(
        sample_id=sample_id,
        profile=profile,
        bundle=bundle.restrict(window_start, bundle.end),
        labels={p.id: StateLabel.NORMAL for p in bundle.pairs},
        window_start=window_start,
        window_length=window_length,
    )


def filter_effective(samples: Iterable[LabeledSample]) -> list[LabeledSample]:
    """Drop injections that left no observable symptom."""
    return [s for s in samples if s.effective]


def root_cause(sample: LabeledSample) -> tuple[int, StateLabel] | None:
    if sample.spec is None:
        return None
    return sample.spec.culprit_pair, StateLabel(sample.spec.failure_type)


def count_by_type(samples: Sequence[LabeledSample]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for s in samples:
        key = "Normal" if s.spec is None else StateLabel(s.spec.failure_type).text
        counts[key] = counts.get(key, 0) + 1
    return counts
