from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from oulagraph.grades import SNAPSHOT_DAYS
from oulagraph.harness import ResultsTable
from oulagraph.report import emit_plots, emit_tables, read_table


def _row(model, case, day, fold, v, seconds=1.0):
    return {"model": model, "case": case, "day": day, "fold": fold, "train_accuracy": v, "train_f1": v * 0.9,
            "val_accuracy": v * 0.8, "val_f1": v * 0.7, "epochs": 0, "seconds": seconds, "status": "ok"}


def _random_table(models, days, seed=0):
    rng = np.random.default_rng(seed)
    rows = [_row(m, c, d, f, float(rng.uniform(0.3, 1.0)), float(rng.uniform(0.1, 5)))
            for m, c in models for d in days for f in range(5)]
    return ResultsTable(rows)


def test_one_model_two_days(tmp_path):
    t = _random_table([("LogisticRegression", 5)], [20, 40])
    emit_tables(t, tmp_path)
    table4 = pd.read_csv(tmp_path / "table4.csv")
    assert list(table4.columns) == ["Model", "Metric", "20", "40"]
    assert len(table4) == 4
    assert list(table4["Metric"]) == ["Train Accuracy", "Train F1", "Val Accuracy", "Val F1"]
    md = (tmp_path / "table4.md").read_text().splitlines()
    assert len(md) == 2 + 4


def test_round_trip_within_rounding(tmp_path):
    models = [("LogisticRegression", 5), ("RandomForest", 5), ("HGT", 5), ("HAN", 5), ("HGT", 1)]
    t = _random_table(models, list(SNAPSHOT_DAYS))
    emit_tables(t, tmp_path)
    means = t.fold_means()
    long = read_table(tmp_path / "table6.csv")
    metric_col = {"Train Accuracy": "train_accuracy", "Train F1": "train_f1", "Val Accuracy": "val_accuracy",
                  "Val F1": "val_f1"}
    label_model = {"Logistic Regression": ("LogisticRegression", 5), "Random Forest Classifier": ("RandomForest", 5),
                   "HGT Case 5": ("HGT", 5)}
    assert len(long) == 3 * 4 * 13
    for _, r in long.iterrows():
        model, case = label_model[r["Model"]]
        m = means[(means.model == model) & (means.case == case) & (means.day == r["day"])].iloc[0]
        assert abs(r["value"] - m[metric_col[r["Metric"]]]) <= 5e-4
    rt = read_table(tmp_path / "table7.csv")
    hgt = rt[(rt.Model == "HGT Case 5") & (rt.Metric == "RT sum")]
    for _, r in hgt.iterrows():
        m = means[(means.model == "HGT") & (means.case == 5) & (means.day == r["day"])].iloc[0]
        assert abs(r["value"] - m["seconds_sum"]) <= 5e-4


def test_missing_cells_blank(tmp_path, caplog):
    t = ResultsTable([_row("HGT", 5, 20, 0, 0.5), _row("HAN", 5, 40, 0, 0.5)])
    emit_tables(t, tmp_path)
    lines = (tmp_path / "table5.csv").read_text().splitlines()
    assert lines[0] == "Model,Metric,20,40"
    assert any(line.startswith("HGT Case 5,Val F1,0.350,") and line.endswith(",") for line in lines)
    assert "missing cell" in caplog.text


def test_deterministic_bytes(tmp_path):
    t = _random_table([("LogisticRegression", 5), ("HGT", 5)], [20, 40, 60])
    loadings = pd.DataFrame(np.arange(6.0).reshape(3, 2), index=["a", "b", "c"], columns=["PC1", "PC2"])
    a = emit_tables(t, tmp_path / "a") + emit_plots(t, tmp_path / "a", loadings)
    b = emit_tables(t, tmp_path / "b") + emit_plots(t, tmp_path / "b", loadings)
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes(), pa.name


def test_empty_results(tmp_path):
    with pytest.raises(ValueError, match="no results"):
        emit_tables(ResultsTable(), tmp_path)
    with pytest.raises(ValueError, match="no results"):
        emit_plots(ResultsTable(), tmp_path)


def test_single_series_line(tmp_path):
    t = _random_table([("HGT", 3)], list(SNAPSHOT_DAYS))
    emit_plots(t, tmp_path)
    curves = pd.read_csv(tmp_path / "fig_cases.csv")
    assert curves["series"].nunique() == 1 and len(curves) == 13
    assert (tmp_path / "fig_cases.png").stat().st_size > 0


def test_identical_models_identical_series(tmp_path):
    rows = [_row(m, 5, d, f, 0.6) for m in ("LDA", "LogisticRegression") for d in (20, 40) for f in range(5)]
    emit_plots(ResultsTable(rows), tmp_path)
    curves = pd.read_csv(tmp_path / "fig_top3.csv")
    lda = curves[curves.series == "LDA"][["day", "val_f1", "val_accuracy"]].reset_index(drop=True)
    lr = curves[curves.series == "Logistic Regression"][["day", "val_f1", "val_accuracy"]].reset_index(drop=True)
    pd.testing.assert_frame_equal(lda, lr)
