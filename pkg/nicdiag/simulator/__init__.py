from nicdiag.simulator.cluster import generate_cluster
from nicdiag.simulator.corpus import Corpus, generate_corpus, read_corpus, write_corpus
from nicdiag.simulator.injection import (
    InjectionSpec,
    LabeledSample,
    count_by_type,
    filter_effective,
    inject_failure,
    normal_sample,
    root_cause,
)
from nicdiag.simulator.profiles import (
    COUNTERS,
    PROFILES,
    DATASET_COUNTS,
    CounterSpec,
    WorkloadProfile,
    counters_for,
    counts_from_preset,
    get_profile,
)
from nicdiag.simulator.telemetry import TelemetryBundle, generate_baseline

__all__ = [
    "COUNTERS",
    "Corpus",
    "CounterSpec",
    "InjectionSpec",
    "LabeledSample",
    "PROFILES",
    "DATASET_COUNTS",
    "TelemetryBundle",
    "WorkloadProfile",
    "count_by_type",
    "counters_for",
    "counts_from_preset",
    "filter_effective",
    "generate_baseline",
    "generate_cluster",
    "generate_corpus",
    "get_profile",
    "inject_failure",
    "normal_sample",
    "read_corpus",
    "root_cause",
    "write_corpus",
]
