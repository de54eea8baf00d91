from __future__ import annotations

import json

import pandas as pd
import pytest

from oulagraph.cli import main
from oulagraph.config import RunConfig
from oulagraph.grades import SNAPSHOT_DAYS
from oulagraph.harness import ResultsStore
from oulagraph.harness.sweep import expected_keys


@pytest.fixture
def run_json(tmp_path, synthetic_dir):
    cfg = {"output_dir": str(tmp_path / "run"), "data_dir": str(synthetic_dir), "seed": 1,
           "models": ["LogisticRegression", "RandomForest", "HAN", "HGT"], "cases": [1, 5], "days": [20, 260],
           "train": {"max_epochs": 12, "patience": 4, "hidden": 4, "heads": 2},
           "grid": {"lr": [0.01, 0.02]}, "tune_day": 20}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_synthesize(tmp_path, capsys):
    assert main(["synthesize", "--out", str(tmp_path / "d"), "--students", "20"]) == 0
    assert {p.name for p in (tmp_path / "d").iterdir()} == {
        "studentInfo.csv", "assessments.csv", "studentAssessment.csv", "studentRegistration.csv"}


def test_preprocess_and_snapshots(tmp_path, synthetic_dir, capsys):
    out = tmp_path / "out"
    argv = ["--data-dir", str(synthetic_dir), "--out", str(out)]
    assert main(["preprocess", *argv]) == 0
    line = capsys.readouterr().out
    n = len(pd.read_csv(out / "canonical.csv"))
    assert f"{n} records" in line
    report = json.loads((out / "preprocess_report.json").read_text())
    assert report["n_output"] == n

    before = (out / "canonical.csv").stat().st_mtime_ns
    assert main(["preprocess", *argv]) == 0
    assert "exists" in capsys.readouterr().out
    assert (out / "canonical.csv").stat().st_mtime_ns == before

    assert main(["snapshots", *argv]) == 0
    assert sorted(p.name for p in (out / "snapshots").iterdir()) == sorted(
        f"snapshot_d{d}.csv" for d in SNAPSHOT_DAYS)
    weights = pd.read_csv(out / "weights.csv")
    assert list(weights.columns) == ["code_module", "code_presentation", "alpha", "beta", "n_fit"]
    assert (out / "folds.csv").exists() and (out / "pca_loadings.csv").exists()
    assert main(["snapshots", *argv]) == 0
    assert "exist" in capsys.readouterr().out


def test_graphs(tmp_path, synthetic_dir, capsys):
    out = tmp_path / "out"
    assert main(["graphs", "--data-dir", str(synthetic_dir), "--out", str(out), "--days", "20",
                 "--cases", "1,5"]) == 0
    stats = pd.read_csv(out / "graphs" / "graph_stats.csv")
    assert len(stats) == 1 * 5 * 2 * 2
    assert (stats["avg_degree"] >= 1).all()
    assert (out / "graphs" / "fold0_train_edges.csv").exists()


def test_sweep_report_and_resume(run_json, capsys):
    cfg = RunConfig.from_json(run_json)
    assert main(["sweep", "--config", str(run_json)]) == 0
    store = ResultsStore(f"{cfg.output_dir}/results.jsonl")
    table = store.load()
    assert not table.missing(expected_keys(cfg))
    assert len(table) == len(expected_keys(cfg)) == 2 * 5 * (2 + 2 * 2)
    n_lines = len(store.path.read_text().splitlines())

    # drop the last row to fake an interrupted sweep; the rerun fills only that gap
    lines = store.path.read_text().splitlines()
    store.path.write_text("\n".join(lines[:-1]) + "\n")
    assert main(["sweep", "--config", str(run_json)]) == 0
    assert len(store.path.read_text().splitlines()) == n_lines

    assert main(["report", "--config", str(run_json)]) == 0
    out = capsys.readouterr().out
    assert "report files" in out
    t6 = pd.read_csv(f"{cfg.output_dir}/table6.csv")
    assert list(t6.columns) == ["Model", "Metric", "20", "260"]
    assert set(t6["Model"]) == {"Logistic Regression", "Random Forest Classifier", "HGT Case 5"}


def test_train_gnn_writes_checkpoints(run_json, tmp_path):
    assert main(["train-gnn", "--config", str(run_json), "--cases", "5", "--days", "20"]) == 0
    ck = sorted(p.name for p in (tmp_path / "run" / "checkpoints").iterdir())
    assert len(ck) == 2 * 5 and ck[0] == "HAN_case5_d20_fold0.json"


def test_report_without_results(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) != 0
    assert "no results" in capsys.readouterr().err
    (tmp_path / "results.jsonl").write_text("")
    assert main(["report", "--out", str(tmp_path)]) != 0


@pytest.mark.parametrize("argv", [
    ["sweep", "--bogus"],
    ["sweep", "--out", "x", "--days", "abc"],
    ["frobnicate"],
])
def test_bad_flags(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code != 0


def test_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"output_dir": str(tmp_path), "days": [21]}))
    assert main(["sweep", "--config", str(bad)]) == 2
    assert main(["sweep", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["sweep", "--out", str(tmp_path), "--models", "Nope"]) == 2
    assert main(["preprocess"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_data_dir(tmp_path, capsys):
    assert main(["preprocess", "--data-dir", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 1
    assert "not found" in capsys.readouterr().err
