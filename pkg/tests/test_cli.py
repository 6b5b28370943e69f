from __future__ import annotations

import json

import pandas as pd
import pytest

from nicdiag.main import build_parser, main


@pytest.fixture
def quick_config(tmp_path, monkeypatch):
    monkeypatch.delenv("NICDIAG_SEED", raising=False)
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"forest": {"n_trees": 20}, "pattern": {"examples_per_class": 40, "epochs": 20}}))
    return path


def test_simulate_writes_corpus(tmp_path, capsys):
    out = tmp_path / "corpus"
    code = main(["simulate", "--compute", "4", "--failures-per-type", "1", "--normals", "2", "--out", str(out)])
    assert code == 0
    assert (out / "manifest.json").exists()
    labels = pd.read_csv(out / "labels.csv")
    assert labels["sample_id"].nunique() == 9
    assert "Wrote 9 samples over 4 NIC pairs" in capsys.readouterr().out


def test_preset_cannot_mix_with_profiles(tmp_path, capsys):
    code = main(["simulate", "--profile", "dataset-wrf", "--profile", "qe", "--out", str(tmp_path)])
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_empty_cluster_is_reported_not_raised(tmp_path, capsys):
    assert main(["simulate", "--compute", "0", "--out", str(tmp_path)]) == 2
    assert "at least one compute node" in capsys.readouterr().err


def test_unknown_protocol_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["evaluate", "--protocol", "speed"])
    assert exc.value.code == 2


def test_diagnose_without_bundle(tmp_path, capsys):
    assert main(["diagnose", "--bundle", str(tmp_path / "none"), "--corpus", str(tmp_path)]) == 2
    assert "bundle.json" in capsys.readouterr().err


@pytest.mark.slow
def test_train_then_diagnose(tmp_path, quick_config, capsys):
    corpus = tmp_path / "corpus"
    bundle = tmp_path / "bundle"
    assert main(["simulate", "--failures-per-type", "4", "--normals", "6", "--seed", "3", "--out", str(corpus)]) == 0
    assert main(["--config", str(quick_config), "train", "--corpus", str(corpus), "--out", str(bundle)]) == 0
    assert "forest OOB accuracy" in capsys.readouterr().out

    sample = json.loads((corpus / "manifest.json").read_text())["samples"][0]["id"]
    args = ["--config", str(quick_config), "diagnose", "--bundle", str(bundle), "--corpus", str(corpus)]
    assert main([*args, "--sample", sample, "--out", str(tmp_path / "out")]) == 0
    table = pd.read_csv(tmp_path / "out" / "diagnosis.csv")
    assert list(table["rank"]) == list(range(1, len(table) + 1))

    raw = corpus / "samples" / sample
    raw_args = ["--topology", str(corpus / "topology.json"), "--metrics", str(raw / "metrics.csv"), "--logs", str(raw / "logs.tsv")]
    assert main(["--config", str(quick_config), "diagnose", "--bundle", str(bundle), *raw_args, "--out", str(tmp_path / "raw")]) == 0
    assert main([*args, "--sample", sample, "--out", str(tmp_path / "again")]) == 0
    first = (tmp_path / "out" / "diagnosis.csv").read_bytes()
    assert (tmp_path / "again" / "diagnosis.csv").read_bytes() == first
    assert (tmp_path / "raw" / "diagnosis.csv").read_bytes() == first
