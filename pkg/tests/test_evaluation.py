from __future__ import annotations

import pandas as pd
import pytest

from nicdiag.config import PipelineConfig
from nicdiag.diagnosis.states import StateLabel
from nicdiag.errors import UnknownProtocolError
from nicdiag.evaluation import (
    MatchMode,
    ProtocolConfig,
    TestCase,
    ac_at_k,
    avg_at_k,
    build_report,
    format_reports,
    load_protocol_config,
    run_protocol,
    write_reports,
)

F1, F2, F3 = StateLabel.F1, StateLabel.F2, StateLabel.F3


def _ranked_at(rank: int, sample_id: str = "s") -> TestCase:
    truth = (0, F1)
    decoys = [(1, F2), (2, F3), (3, F2), (1, F3), (2, F2)]
    predicted = decoys[: rank - 1] + [truth] + decoys[rank - 1 : 4]
    return TestCase(sample_id, truth, tuple(predicted))


@pytest.fixture
def three_cases() -> list[TestCase]:
    return [_ranked_at(1, "a"), _ranked_at(2, "b"), _ranked_at(4, "c")]


def test_ac_at_k_counts_hits(three_cases):
    assert ac_at_k(three_cases, 1) == pytest.approx(1 / 3)
    assert ac_at_k(three_cases, 3) == pytest.approx(2 / 3)
    assert ac_at_k(three_cases, 5) == pytest.approx(1.0)


def test_avg_at_5(three_cases):
    assert avg_at_k(three_cases, 5) == pytest.approx(0.73333, abs=1e-5)


def test_all_correct_cases_score_one():
    cases = [_ranked_at(1, str(i)) for i in range(4)]
    assert ac_at_k(cases, 1) == 1.0
    assert avg_at_k(cases, 5) == 1.0


def test_ac_is_monotone_in_k(three_cases):
    values = [ac_at_k(three_cases, k) for k in range(1, 6)]
    assert values == sorted(values)


def test_bad_k_and_empty_set(three_cases):
    with pytest.raises(ValueError):
        ac_at_k(three_cases, 0)
    with pytest.raises(ValueError):
        avg_at_k([], 5)


def test_duplicate_predictions_are_rejected():
    with pytest.raises(ValueError):
        TestCase("x", (0, F1), ((1, F2), (1, F2)))


def test_match_modes():
    case = TestCase("x", (0, F1), ((0, F2), (1, F1)))
    assert case.rank(MatchMode.PAIR_ONLY) == 1
    assert case.rank(MatchMode.TYPE_ONLY) == 2
    assert case.rank(MatchMode.PAIR_AND_TYPE) is None
    assert ac_at_k([case], 2, "type-only") == 1.0


def test_report_breaks_down_by_type():
    cases = [TestCase("a", (0, F1), ((0, F1),)), TestCase("b", (1, F2), ((0, F1), (1, F2)), seconds=0.5)]
    report = build_report("full/wrf_b", cases)
    assert report.per_type == {
        "F1": {1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0, 5: 1.0},
        "F2": {1: 0.0, 2: 1.0, 3: 1.0, 4: 1.0, 5: 1.0},
    }
    assert report.n_cases == 2
    assert report.mean_seconds == pytest.approx(0.25)


def test_reports_on_disk(tmp_path, three_cases):
    reports = [build_report("full/wrf_b", three_cases), build_report("C5/wrf_b", three_cases[:1])]
    paths = write_reports(reports, tmp_path)
    assert [p.name for p in paths] == ["report.csv", "report_by_type.csv", "report.txt"]
    frame = pd.read_csv(tmp_path / "report.csv")
    assert list(frame["method"]) == ["full/wrf_b", "C5/wrf_b"]
    assert frame.loc[0, "Avg@5"] == pytest.approx(0.7333)
    text = format_reports(reports)
    assert text.splitlines()[0].split()[:3] == ["method", "AC@1", "AC@2"]
    assert format_reports([]) == "(no reports)"


def test_unknown_protocol():
    with pytest.raises(UnknownProtocolError):
        run_protocol("speed")


def test_protocol_config_file(tmp_path):
    path = tmp_path / "protocol.json"
    path.write_text('{"compute": 8, "failures_per_type": 5, "unused": 1}')
    config = load_protocol_config(path)
    assert (config.compute, config.failures_per_type, config.normals) == (8, 5, 40)
    path.write_text("{broken")
    assert load_protocol_config(path) == ProtocolConfig()


def test_dataset_counts_exclude_missing_types():
    counts = ProtocolConfig(dataset_counts=True).counts("lammps")
    assert counts[StateLabel.F5] == 0
    assert counts[StateLabel.NORMAL] == 36


@pytest.mark.slow
def test_overall_protocol_meets_accuracy_targets():
    config = ProtocolConfig(failures_per_type=60, normals=40, n_jobs=2)
    pipeline_config = PipelineConfig(seed=1)
    pipeline_config.forest.n_trees = 60
    reports = run_protocol("overall", config, pipeline_config)
    report = reports["overall/wrf_b"]
    assert report.n_cases >= 200
    assert report.ac[1] >= 0.9
    assert report.avg[5] >= 0.95
    assert pipeline_config.seed == 1


@pytest.mark.slow
def test_ablation_without_metrics_or_logs_scores_lower():
    config = ProtocolConfig(failures_per_type=16, normals=16, n_jobs=2)
    reports = run_protocol("ablation", config, PipelineConfig(seed=2))
    assert set(reports) == {f"{v}/wrf_b" for v in ("full", "C1", "C2", "C3", "C4", "C5")}
    full = reports["full/wrf_b"].avg[5]
    assert reports["C3/wrf_b"].avg[5] < full
    assert reports["C4/wrf_b"].avg[5] < full


@pytest.mark.slow
def test_small_cluster_model_transfers_to_large_cluster():
    config = ProtocolConfig(failures_per_type=10, normals=10, switches=2, n_jobs=2)
    reports = run_protocol("scalability", config, PipelineConfig(seed=4))
    transfer, native = reports["16_a->32_b"], reports["32_a->32_b"]
    assert transfer.ac[1] >= 0.80
    assert abs(transfer.avg[5] - native.avg[5]) <= 0.10


@pytest.mark.slow
def test_robustness_scores_classifier_only_alongside_full():
    config = ProtocolConfig(failures_per_type=12, normals=12, n_jobs=2, test_profiles=["qe", "lammps"])
    reports = run_protocol("robustness", config, PipelineConfig(seed=6))
    assert set(reports) == {"robustness/qe", "robustness/qe/C5", "robustness/lammps", "robustness/lammps/C5"}
    full = [reports[f"robustness/{p}"] for p in ("qe", "lammps")]
    classifier_only = [reports[f"robustness/{p}/C5"] for p in ("qe", "lammps")]
    assert [r.n_cases for r in classifier_only] == [r.n_cases for r in full]
    assert sum(r.avg[5] for r in classifier_only) <= sum(r.avg[5] for r in full)
