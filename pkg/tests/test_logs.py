from __future__ import annotations

import math

import pytest
from sklearn.metrics.pairwise import cosine_similarity

from nicdiag.diagnosis.states import StateLabel
from nicdiag.errors import TelemetryValidationError, TrainingError
from nicdiag.features.logcluster import (
    LogClusterModel,
    TemplateVector,
    cluster_templates,
    fit_normal_counts,
    load_log_model,
    quantize_counts,
    save_log_model,
    vectorize_templates,
    window_counts,
)
from nicdiag.features.logcluster import _dense
from nicdiag.features.templates import LogTemplate, TemplateParser, parse_templates
from nicdiag.simulator.cluster import generate_cluster
from nicdiag.simulator.corpus import generate_corpus
from nicdiag.simulator.profiles import get_profile
from nicdiag.telemetry.model import LogRecord


def _records(*messages: str) -> list[LogRecord]:
    return [LogRecord(float(i), "server1", "INFO", m) for i, m in enumerate(messages)]


def _template(tid: int, text: str) -> LogTemplate:
    return LogTemplate(tid, tuple(text.split()), 1)


def _model(mu: float, sigma: float) -> LogClusterModel:
    return LogClusterModel(templates=(_template(0, "CRC Error on port <*>"),), clusters={0: (0,)}, mu={0: mu}, sigma={0: sigma})


def test_drain_generalizes_varying_token():
    templates, assignments = parse_templates(_records("CRC Error on port 3", "CRC Error on port 7"))
    assert len(templates) == 1
    assert templates[0].text == "CRC Error on port <*>"
    assert assignments == [0, 0]


def test_single_record_is_its_own_template():
    templates, _ = parse_templates(_records("Link NIC1 state UP"))
    assert [t.text for t in templates] == ["Link NIC1 state UP"]


def test_match_does_not_grow_the_tree():
    parser = TemplateParser()
    parser.add("CRC Error on port 3")
    parser.add("CRC Error on port 7")
    assert parser.match("CRC Error on port 5") == 0
    assert parser.match("Tx Timeout on queue 2 of NIC1 after 1200 ms") is None
    assert len(parser.templates()) == 1


def test_parser_rebuilt_from_templates_matches_the_same():
    templates, _ = parse_templates(_records("CRC Error on port 3", "CRC Error on port 7", "Heartbeat from monitor agent 5 ok"))
    rebuilt = TemplateParser.from_templates(templates)
    assert rebuilt.match("CRC Error on port 9") == 0
    assert rebuilt.match("Heartbeat from monitor agent 12 ok") == 1


def test_single_template_weights_are_term_frequencies():
    (vector,) = vectorize_templates([_template(0, "CRC Error on port <*> lane <*>")])
    # idf = ln(1/1) + 1 = 1, so each weight equals the token count
    assert vector.weights == {"CRC": 1.0, "Error": 1.0, "on": 1.0, "port": 1.0, "lane": 1.0}


def test_idf_downweights_shared_tokens():
    vectors = vectorize_templates([_template(0, "CRC Error on port <*>"), _template(1, "Tx Timeout on queue <*>")])
    assert vectors[0].weights["on"] == pytest.approx(1.0)
    assert vectors[0].weights["CRC"] == pytest.approx(math.log(2.0) + 1.0)


def test_disjoint_and_identical_cosine():
    vectors = vectorize_templates(
        [_template(0, "CRC Error <*>"), _template(1, "Heartbeat ok <*>"), _template(2, "CRC Error <*>")]
    )
    sim = cosine_similarity(_dense(vectors))
    assert sim[0, 1] == pytest.approx(0.0)
    assert sim[0, 2] == pytest.approx(1.0)


def test_wildcard_only_template_is_rejected():
    with pytest.raises(TelemetryValidationError):
        vectorize_templates([_template(0, "<*> <*>")])


def test_single_vector_single_cluster():
    model = cluster_templates(vectorize_templates([_template(0, "Link up")]))
    assert model.clusters == {0: (0,)}


def test_identical_vectors_merge_at_zero():
    templates = [_template(0, "CRC Error <*>"), _template(1, "CRC Error <*>")]
    model = cluster_templates(vectorize_templates(templates), templates=templates)
    assert model.clusters == {0: (0, 1)}
    assert model.merges[0].distance == pytest.approx(0.0, abs=1e-12)


def test_close_pair_and_orthogonal_template():
    templates = [
        _template(0, "CRC Error on port <*> lane <*>"),
        _template(1, "CRC Error on port <*>"),
        _template(2, "Heartbeat from monitor agent <*> ok"),
    ]
    model = cluster_templates(vectorize_templates(templates), templates=templates)
    assert model.clusters == {0: (0, 1), 1: (2,)}


def test_clustering_ignores_input_order():
    templates = [
        _template(0, "CRC Error on port <*> lane <*>"),
        _template(1, "Heartbeat from monitor agent <*> ok"),
        _template(2, "CRC Error on port <*>"),
    ]
    a = cluster_templates(vectorize_templates(templates), templates=templates)
    b = cluster_templates(list(reversed(vectorize_templates(templates))), templates=templates)
    assert a.clusters == b.clusters


def test_normal_count_statistics():
    model = fit_normal_counts(_model(0.0, 0.0), [{0: 4}, {0: 6}])
    assert model.mu[0] == 5.0
    assert model.sigma[0] == 1.0
    unseen = fit_normal_counts(_model(0.0, 0.0), [{}, {}])
    assert (unseen.mu[0], unseen.sigma[0]) == (0.0, 0.0)
    constant = fit_normal_counts(_model(0.0, 0.0), [{0: 3}, {0: 3}, {0: 3}])
    assert constant.sigma[0] == 0.0


def test_one_normal_window_is_not_enough():
    with pytest.raises(TrainingError):
        fit_normal_counts(_model(0.0, 0.0), [{0: 1}])


@pytest.mark.parametrize(
    "mu, sigma, count, expected",
    [(5.0, 1.0, 9, 1), (5.0, 1.0, 5, 0), (0.0, 0.0, 1, 1), (0.0, 0.0, 0, 0), (5.0, 1.0, 8, 0)],
)
def test_three_sigma_rule(mu, sigma, count, expected):
    assert quantize_counts(_model(mu, sigma), {0: count}).symbols == {0: expected}


def test_window_counts_skip_unknown_lines():
    model = _model(0.0, 0.0)
    seen = []
    counts = window_counts(model, _records("CRC Error on port 3", "CRC Error on port 4", "Something else"), seen.append)
    assert counts == {0: 2}
    assert seen and "1 records" in seen[0]


def test_log_model_file_round_trip(tmp_path):
    templates = [_template(0, "CRC Error on port <*>"), _template(1, "Heartbeat from monitor agent <*> ok")]
    model = fit_normal_counts(
        cluster_templates(vectorize_templates(templates), templates=templates), [{0: 0, 1: 6}, {0: 0, 1: 6}]
    )
    path = tmp_path / "logs.txt"
    save_log_model(model, path)
    loaded = load_log_model(path)
    assert loaded.clusters == model.clusters
    assert loaded.mu == model.mu
    assert [t.tokens for t in loaded.templates] == [t.tokens for t in model.templates]
    assert window_counts(loaded, _records("CRC Error on port 2")) == window_counts(model, _records("CRC Error on port 2"))


def test_normal_windows_quantize_to_zero(trained_bundle):
    model = trained_bundle.log_model
    normals = generate_corpus(generate_cluster(4, 1), [get_profile("wrf")], {StateLabel.NORMAL: 10}, seed=123)
    quiet = [
        not quantize_counts(model, window_counts(model, slice_.logs)).anomalous
        for sample in normals
        for slice_ in sample.window().slices.values()
    ]
    assert sum(quiet) >= 0.99 * len(quiet)


def test_reparsing_templates_reproduces_them(small_corpus):
    records = [r for sample in small_corpus for r in sample.bundle.logs]
    templates, _ = parse_templates(records)
    again, _ = parse_templates(_records(*(t.text for t in templates)))
    assert sorted(t.text for t in again) == sorted(t.text for t in templates)


def test_equal_distance_merges_prefer_the_narrowest_id_span():
    # 0 and 3 merge first; {0, 3} and 2 are then equally far from 1
    vectors = [
        TemplateVector(0, {"a": 1.0}),
        TemplateVector(1, {"a": 1.0, "b": 1.0}),
        TemplateVector(2, {"b": 1.0}),
        TemplateVector(3, {"a": 1.0}),
    ]
    model = cluster_templates(vectors, distance_threshold=0.5)
    assert model.clusters == {0: (0, 3), 1: (1, 2)}
