from __future__ import annotations

import filecmp

import numpy as np
import pytest

from nicdiag.diagnosis.states import FAILURE_TYPES, StateLabel
from nicdiag.errors import TelemetryValidationError
from nicdiag.simulator.cluster import generate_cluster
from nicdiag.simulator.corpus import generate_corpus, read_corpus, write_corpus
from nicdiag.simulator.injection import (
    CULPRIT_SYMPTOMS,
    InjectionSpec,
    count_by_type,
    filter_effective,
    inject_failure,
    root_cause,
)
from nicdiag.simulator.profiles import DATASET_COUNTS, WorkloadProfile, counters_for, counts_from_preset, get_profile
from nicdiag.simulator.telemetry import generate_baseline
from nicdiag.telemetry.model import derive_nic_pairs

WINDOW = 3600


def _bundle(topology, seed: int = 1, profile: str = "wrf"):
    return generate_baseline(topology, get_profile(profile), 2 * WINDOW, seed, start=0)


def _spec(failure: StateLabel, culprit: int = 1, intensity: float = 10.0) -> InjectionSpec:
    return InjectionSpec(failure, culprit, onset=WINDOW + 1200, duration=1800, intensity=intensity)


def _window_sum(sample, pair_id: int, kind: str, metric: str) -> int:
    return int(sample.window().slices[pair_id].side(kind)[metric].sum())


def test_cluster_single_switch():
    pairs = derive_nic_pairs(generate_cluster(4, 1))
    assert len(pairs) == 4
    assert {p.switch for p in pairs} == {"switch1"}
    assert sorted(p.switch_port for p in pairs) == [f"100GE1/0/{i}" for i in range(1, 5)]


def test_cluster_round_robin():
    pairs = derive_nic_pairs(generate_cluster(16, 2))
    assert len(pairs) == 16
    assert sum(p.switch == "switch1" for p in pairs) == 8
    assert len(derive_nic_pairs(generate_cluster(1, 1))) == 1


def test_bad_cluster_and_profile_are_validation_errors():
    with pytest.raises(TelemetryValidationError):
        generate_cluster(0, 1)
    with pytest.raises(TelemetryValidationError):
        get_profile("hpl")
    with pytest.raises(TelemetryValidationError):
        WorkloadProfile("bad", burst_period=0, burst_amplitude=1.0, baseline_rate=1.0, noise_std=0.0)


def test_noise_free_baseline_is_deterministic(topology):
    quiet = WorkloadProfile("quiet", burst_period=600, burst_amplitude=1000, baseline_rate=5000, noise_std=0)
    a = generate_baseline(topology, quiet, 2 * WINDOW, seed=1)
    b = generate_baseline(topology, quiet, 2 * WINDOW, seed=2)
    for key, series in a.series.items():
        assert np.array_equal(np.diff(series.values), np.diff(b.series[key].values))


def test_seeds_change_values_not_schema(topology):
    a, b = _bundle(topology, 1), _bundle(topology, 2)
    assert set(a.series) == set(b.series)
    assert any(not np.array_equal(a.series[k].values, b.series[k].values) for k in a.series)


def test_counter_catalogue_per_side():
    assert len(counters_for("compute")) == 20
    assert len(counters_for("switch")) == 17


def test_baseline_event_counters_stay_flat(topology):
    bundle = _bundle(topology)
    for (owner, metric), series in bundle.series.items():
        if metric in ("rx_crc_errors_phy", "tx_prio_pause", "rx_discards_phy"):
            assert not np.diff(series.values).any(), owner


def test_crc_injection_raises_counter_and_logs(topology):
    bundle = _bundle(topology)
    sample = inject_failure(bundle, _spec(StateLabel.F1), seed=3)
    assert sample.effective
    injected = _window_sum(sample, 1, "compute", "rx_crc_errors_phy")
    baseline = max(_window_sum(sample, p, "compute", "rx_crc_errors_phy") for p in (0, 2, 3))
    assert injected > baseline
    culprit_node = sample.pairs[1].compute_node
    assert any(r.owner == culprit_node and r.message.startswith("CRC Error") for r in sample.bundle.logs)
    assert sample.labels[1] is StateLabel.F1
    assert all(sample.labels[p] is StateLabel.VICTIM for p in (0, 2, 3))
    assert root_cause(sample) == (1, StateLabel.F1)


def test_tx_timeout_injection_logs(topology):
    sample = inject_failure(_bundle(topology), _spec(StateLabel.F4, culprit=2), seed=3)
    node = sample.pairs[2].compute_node
    assert sum(r.owner == node and "Tx Timeout" in r.message for r in sample.bundle.logs) >= 1


def test_victims_see_pause_frames(topology):
    sample = inject_failure(_bundle(topology), _spec(StateLabel.F2, culprit=0), seed=3)
    assert _window_sum(sample, 0, "compute", "tx_prio_pause") > 0
    for victim in (1, 2, 3):
        assert _window_sum(sample, victim, "compute", "rx_prio_pause") > 0


def test_job_limits_victims(topology):
    spec = InjectionSpec(StateLabel.F2, 0, onset=WINDOW + 600, duration=1800, intensity=8.0, job_pairs=(0, 2))
    sample = inject_failure(_bundle(topology), spec, seed=3)
    assert sample.labels == {0: StateLabel.F2, 1: StateLabel.NORMAL, 2: StateLabel.VICTIM, 3: StateLabel.NORMAL}


def test_unit_intensity_is_filtered(topology):
    bundle = _bundle(topology)
    sample = inject_failure(bundle, _spec(StateLabel.F3, intensity=1.0), seed=3)
    assert not sample.effective
    assert filter_effective([sample]) == []
    restricted = bundle.restrict(WINDOW, 2 * WINDOW)
    for key, series in restricted.series.items():
        assert np.array_equal(series.values, sample.bundle.series[key].values)


def test_normal_log_counts_are_constant(topology):
    counts = {StateLabel.NORMAL: 5}
    samples = generate_corpus(topology, [get_profile("qe")], counts, seed=2)
    per_window = {len(s.window().slices[0].logs) for s in samples}
    assert len(per_window) == 1


def test_dataset_wrf_preset_total(topology):
    profile, counts, normal = counts_from_preset("dataset-wrf")
    assert sum(counts.values()) + normal == 287
    assert DATASET_COUNTS["lammps"][4] == DATASET_COUNTS["lammps"][6] == 0


@pytest.mark.slow
def test_dataset_wrf_corpus_size(topology):
    profile, counts, normal = counts_from_preset("dataset-wrf")
    samples = generate_corpus(topology, [profile], {**counts, StateLabel.NORMAL: normal}, seed=7, n_jobs=2)
    assert len(samples) == 287
    assert count_by_type(samples)["F1"] == 41


def test_zero_counts_give_empty_corpus(topology):
    assert generate_corpus(topology, [get_profile("wrf")], {}, seed=1) == []


def test_excluded_failures_are_skipped(topology):
    counts = {StateLabel.F5: 2, StateLabel.F7: 2, StateLabel.F1: 1}
    samples = generate_corpus(topology, [get_profile("lammps")], counts, seed=1)
    assert [s.failure_type for s in samples] == [StateLabel.F1]


def test_corpus_is_reproducible_on_disk(tmp_path, topology):
    counts = {StateLabel.F6: 2, StateLabel.NORMAL: 1}
    for name in ("a", "b"):
        samples = generate_corpus(topology, [get_profile("wrf")], counts, seed=9)
        write_corpus(samples, topology, tmp_path / name)
    for rel in ("manifest.json", "labels.csv", "topology.json"):
        assert filecmp.cmp(tmp_path / "a" / rel, tmp_path / "b" / rel, shallow=False)
    sid = samples[0].sample_id
    for rel in ("metrics.csv", "logs.tsv"):
        assert filecmp.cmp(tmp_path / "a" / "samples" / sid / rel, tmp_path / "b" / "samples" / sid / rel, shallow=False)


def test_corpus_read_back(tmp_path, topology):
    counts = {ftype: 1 for ftype in FAILURE_TYPES}
    counts[StateLabel.NORMAL] = 1
    samples = generate_corpus(topology, [get_profile("grapes")], counts, seed=4)
    write_corpus(samples, topology, tmp_path)
    corpus = read_corpus(tmp_path)
    assert len(corpus) == len(samples)
    original = samples[3]
    loaded = corpus.by_id(original.sample_id)
    assert loaded.labels == original.labels
    assert loaded.spec == original.spec
    a, b = original.window(), loaded.window()
    for pid in a.slices:
        for metric, diffs in a.slices[pid].compute.items():
            assert np.array_equal(diffs, b.slices[pid].compute[metric])
        assert a.slices[pid].logs == b.slices[pid].logs


def test_read_corpus_subset(tmp_path, topology):
    samples = generate_corpus(topology, [get_profile("wrf")], {StateLabel.NORMAL: 3}, seed=4)
    write_corpus(samples, topology, tmp_path)
    corpus = read_corpus(tmp_path, [samples[1].sample_id])
    assert [s.sample_id for s in corpus.samples] == [samples[1].sample_id]
    with pytest.raises(KeyError):
        read_corpus(tmp_path, ["missing"])


@pytest.mark.parametrize("failure", [f for f in FAILURE_TYPES if CULPRIT_SYMPTOMS[f]])
def test_symptoms_grow_with_intensity(topology, failure):
    bundle = _bundle(topology)
    kind, metric = CULPRIT_SYMPTOMS[failure][0]
    sums = [
        _window_sum(inject_failure(bundle, _spec(failure, intensity=f), seed=3), 1, kind, metric)
        for f in (1.0, 1.5, 3.0, 8.0, 20.0)
    ]
    assert sums == sorted(sums)
    assert sums[-1] > sums[0]


def test_baseline_traffic_matches_profile_rates():
    profile = get_profile("wrf")
    bundle = generate_baseline(generate_cluster(1, 1), profile, 1000 * WINDOW, seed=4, start=0)
    pair = bundle.pairs[0]
    per_window = [
        bundle.window(start, WINDOW).slices[0].compute["rx_packets_phy"].sum()
        for start in range(0, 1000 * WINDOW, 20 * WINDOW)
    ]
    increments = np.diff(bundle.series[(pair.compute, "rx_packets_phy")].values)
    expected = profile.baseline_rate + profile.burst_amplitude * profile.burst_duty
    assert abs(increments.mean() - expected) <= 0.05 * expected
    assert abs(np.mean(per_window) / (WINDOW // 60 - 1) - expected) <= 0.05 * expected
