from __future__ import annotations

from dataclasses import dataclass, field

from nicdiag.diagnosis.states import FAILURE_TYPES, StateLabel
from nicdiag.errors import TelemetryValidationError


@dataclass(frozen=True)
class CounterSpec:
    """
    One simulated NIC counter. Traffic counters follow the workload with `traffic_share`
    packets per packet of job traffic; event counters idle at zero and count `symptom_unit`
    extra events per minute per unit of injected intensity.
    """

    name: str
    kinds: tuple[str, ...] = ("compute", "switch")
    traffic_share: float = 0.0
    symptom_unit: float = 0.0


COUNTERS: tuple[CounterSpec, ...] = (
    CounterSpec("rx_packets_phy", traffic_share=1.0),
    CounterSpec("tx_packets_phy", traffic_share=1.0),
    CounterSpec("rx_bytes_phy", traffic_share=4096.0),
    CounterSpec("tx_bytes_phy", traffic_share=4096.0),
    CounterSpec("rx_unicast_packets", traffic_share=0.95),
    CounterSpec("tx_unicast_packets", traffic_share=0.95),
    CounterSpec("rx_multicast_packets", traffic_share=0.02),
    CounterSpec("tx_multicast_packets", traffic_share=0.02),
    CounterSpec("rx_crc_errors_phy", symptom_unit=50.0),
    CounterSpec("rx_symbol_errors_phy", symptom_unit=20.0),
    CounterSpec("rx_prio_pause", symptom_unit=200.0),
    CounterSpec("tx_prio_pause", symptom_unit=200.0),
    CounterSpec("rx_prio_discards", symptom_unit=40.0),
    CounterSpec("rx_discards_phy", symptom_unit=40.0),
    CounterSpec("tx_discards_phy", symptom_unit=40.0),
    CounterSpec("rx_ecn_marked_pkts", symptom_unit=100.0),
    CounterSpec("tx_ecn_marked_pkts", symptom_unit=100.0),
    CounterSpec("cpu_busy_ticks", kinds=("compute",), traffic_share=0.05),
    CounterSpec("cpu_softirq_ticks", kinds=("compute",), traffic_share=0.01),
    CounterSpec("cpu_iowait_ticks", kinds=("compute",), traffic_share=0.002),
)

COUNTER_BY_NAME = {c.name: c for c in COUNTERS}


def counters_for(kind: str) -> tuple[CounterSpec, ...]:
    return tuple(c for c in COUNTERS if kind in c.kinds)


@dataclass(frozen=True)
class WorkloadProfile:
    name: str
    burst_period: int
    burst_amplitude: float
    baseline_rate: float
    noise_std: float
    burst_duty: float = 0.3
    excluded_failures: frozenset[StateLabel] = field(default_factory=frozenset)

    def __post_init__(self):
        if min(self.burst_amplitude, self.baseline_rate, self.noise_std) < 0:
            raise TelemetryValidationError(f"profile {self.name}: rates must be non-negative")
        if self.burst_period <= 0 or not 0.0 <= self.burst_duty <= 1.0:
            raise TelemetryValidationError(f"profile {self.name}: bad burst period or duty cycle")


PROFILES: dict[str, WorkloadProfile] = {
    p.name: p
    for p in (
        WorkloadProfile("wrf", burst_period=600, burst_amplitude=30_000, baseline_rate=50_000, noise_std=1_500),
        WorkloadProfile("grapes", burst_period=900, burst_amplitude=45_000, baseline_rate=40_000, noise_std=2_000),
        WorkloadProfile("qe", burst_period=300, burst_amplitude=20_000, baseline_rate=80_000, noise_std=2_500, burst_duty=0.5),
        WorkloadProfile("gromacs", burst_period=1200, burst_amplitude=60_000, baseline_rate=30_000, noise_std=1_500, burst_duty=0.2),
        WorkloadProfile(
            "lammps",
            burst_period=400,
            burst_amplitude=25_000,
            baseline_rate=45_000,
            noise_std=1_800,
            excluded_failures=frozenset({StateLabel.F5, StateLabel.F7}),
        ),
        WorkloadProfile("openfoam", burst_period=720, burst_amplitude=35_000, baseline_rate=55_000, noise_std=2_200, burst_duty=0.4),
    )
}

# Failure counts F1..F7 followed by the number of failure-free samples.
DATASET_COUNTS: dict[str, tuple[int, ...]] = {
    "wrf": (41, 41, 30, 25, 32, 27, 24, 67),
    "grapes": (25, 24, 21, 20, 17, 22, 15, 40),
    "qe": (23, 22, 19, 18, 16, 20, 14, 38),
    "gromacs": (21, 20, 18, 16, 15, 19, 12, 35),
    "lammps": (22, 21, 17, 16, 0, 18, 0, 36),
    "openfoam": (20, 21, 18, 17, 14, 16, 13, 34),
}


def get_profile(name: str) -> WorkloadProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise TelemetryValidationError(f"unknown workload profile {name!r}; choose from {', '.join(PROFILES)}") from None


def counts_from_preset(preset: str) -> tuple[WorkloadProfile, dict[StateLabel, int], int]:
    """Resolve `dataset-<profile>` into (profile, per-failure counts, normal count)."""
    name = preset.removeprefix("dataset-")
    profile = get_profile(name)
    row = DATASET_COUNTS[name]
    return profile, {ftype: row[i] for i, ftype in enumerate(FAILURE_TYPES)}, row[-1]
