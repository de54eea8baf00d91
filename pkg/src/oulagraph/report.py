"""Tables and figures derived from a results table.

Reports are pure views of the results: every cell is a fold mean of rows in
``results.jsonl``, printed with three decimals.
"""
from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .harness.results import ResultsTable  # noqa: E402

logger = logging.getLogger(__name__)

METRIC_ROWS = [("train_accuracy", "Train Accuracy"), ("train_f1", "Train F1"),
               ("val_accuracy", "Val Accuracy"), ("val_f1", "Val F1")]

DISPLAY = {
    "LogisticRegression": "Logistic Regression",
    "LDA": "LDA",
    "RandomForest": "Random Forest Classifier",
    "KNN": "KNN Classifier",
    "GaussianNB": "Gaussian Naive Bayes",
    "QDA": "QDA",
    "Bagging": "Bagging Classifier",
    "SVC": "SVC",
    "DecisionTree": "Decision Tree Classifier",
}
BASELINE_ORDER = list(DISPLAY)


def series_label(model: str, case: int) -> str:
    if model in DISPLAY:
        return DISPLAY[model]
    return f"{model} Case {case}"


TABLES = {
    "table4": {"series": [(m, 5) for m in BASELINE_ORDER], "metrics": METRIC_ROWS},
    "table5": {"series": [(m, c) for c in range(1, 6) for m in ("HAN", "HGT")], "metrics": METRIC_ROWS},
    "table6": {"series": [("LogisticRegression", 5), ("RandomForest", 5), ("HGT", 5)],
               "metrics": METRIC_ROWS},
    "table7": {"series": [("LogisticRegression", 5), ("RandomForest", 5), ("HGT", 5),
                          ("HAN", 5)],
               "metrics": [("seconds_mean", "RT mean"), ("seconds_sum", "RT sum")]},
}


def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.3f}"


def build_table(means: pd.DataFrame, series, metrics, days) -> pd.DataFrame:
    rows = []
    for model, case in series:
        sub = means[(means["model"] == model) & (means["case"] == case)]
        if sub.empty:
            continue
        by_day = sub.set_index("day")
        for col, label in metrics:
            row = {"Model": series_label(model, case), "Metric": label}
            for d in days:
                if d in by_day.index:
                    row[str(d)] = float(by_day.at[d, col])
                else:
                    logger.warning("missing cell %s %s day %d", series_label(model, case), label, d)
                    row[str(d)] = np.nan
            rows.append(row)
    return pd.DataFrame(rows, columns=["Model", "Metric", *map(str, days)])


def to_markdown(table: pd.DataFrame) -> str:
    head = "| " + " | ".join(table.columns) + " |"
    sep = "|" + "|".join(["---", "---"] + ["---:"] * (len(table.columns) - 2)) + "|"
    lines = [head, sep]
    for _, r in table.iterrows():
        cells = [r["Model"], r["Metric"]] + [_fmt(r[c]) for c in table.columns[2:]]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_tables(results: ResultsTable, out_dir: str | Path) -> list[Path]:
    """Write ``table4`` .. ``table7`` as CSV and Markdown; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    means = results.fold_means()
    if means.empty:
        raise ValueError("no results")
    days = sorted(int(d) for d in means["day"].unique())
    paths = []
    for name, spec in TABLES.items():
        table = build_table(means, spec["series"], spec["metrics"], days)
        if table.empty:
            logger.warning("%s: no matching results", name)
        csv_path = out_dir / f"{name}.csv"
        with csv_path.open("w", newline="") as fh:
            fh.write(",".join(table.columns) + "\n")
            for _, r in table.iterrows():
                fh.write(",".join([r["Model"], r["Metric"]] + [_fmt(r[c]) for c in table.columns[2:]]) + "\n")
        md_path = out_dir / f"{name}.md"
        md_path.write_text(to_markdown(table))
        paths += [csv_path, md_path]
    return paths


def read_table(path: str | Path) -> pd.DataFrame:
    """Parse an emitted table CSV into long form (Model, Metric, day, value)."""
    wide = pd.read_csv(path)
    long = wide.melt(id_vars=["Model", "Metric"], var_name="day", value_name="value")
    long["day"] = long["day"].astype(int)
    return long


# --------------------------------------------------------------------------- figures


def _curve_frame(means: pd.DataFrame, series) -> pd.DataFrame:
    rows = []
    for model, case in series:
        sub = means[(means["model"] == model) & (means["case"] == case)].sort_values("day")
        for _, r in sub.iterrows():
            rows.append({"series": series_label(model, case), "day": int(r["day"]),
                         "val_f1": float(r["val_f1"]), "val_accuracy": float(r["val_accuracy"])})
    return pd.DataFrame(rows, columns=["series", "day", "val_f1", "val_accuracy"])


def line_figure(curves: pd.DataFrame, title: str):
    fig, axes = plt.subplots(1, 2, figsize=(12, 4.5), sharex=True)
    for ax, col, label in zip(axes, ("val_f1", "val_accuracy"), ("Validation F1", "Validation accuracy")):
        for name, grp in curves.groupby("series", sort=False):
            ax.plot(grp["day"], grp[col], marker="o", ms=3, label=name)
        ax.set_xlabel("Days since semester start")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=7)
    fig.suptitle(title)
    fig.tight_layout()
    return fig


def heatmap_figure(loadings: pd.DataFrame):
    fig, ax = plt.subplots(figsize=(1.2 + 0.6 * loadings.shape[1], 1.0 + 0.22 * loadings.shape[0]))
    vmax = float(np.abs(loadings.to_numpy()).max()) or 1.0
    im = ax.imshow(loadings.to_numpy(), cmap="coolwarm", vmin=-vmax, vmax=vmax, aspect="auto")
    ax.set_yticks(range(len(loadings.index)), loadings.index, fontsize=6)
    ax.set_xticks(range(loadings.shape[1]), loadings.columns, fontsize=7)
    fig.colorbar(im, ax=ax)
    ax.set_title("PCA loadings")
    fig.tight_layout()
    return fig


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


FIGURES = {
    "fig_cases": ("Validation metrics across feature cases",
                  [(m, c) for m in ("HAN", "HGT") for c in range(1, 6)]),
    "fig_case2v5": ("Case 2 vs case 5", [(m, c) for m in ("HAN", "HGT") for c in (2, 5)]),
    "fig_top3": ("Best baselines vs case-5 graph models",
                 [("LDA", 5), ("LogisticRegression", 5), ("RandomForest", 5), ("HAN", 5), ("HGT", 5)]),
}


def emit_plots(results: ResultsTable, out_dir: str | Path, pca_loadings: pd.DataFrame | None = None) -> list[Path]:
    """Line charts (with backing CSVs) and, when given, the PCA loading heatmap."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    means = results.fold_means()
    if means.empty:
        raise ValueError("no results")
    paths = []
    for name, (title, series) in FIGURES.items():
        curves = _curve_frame(means, series)
        curves.to_csv(out_dir / f"{name}.csv", index=False, float_format="%.6f")
        paths.append(out_dir / f"{name}.csv")
        if curves.empty:
            logger.warning("%s: no matching series", name)
            continue
        paths.append(_save(line_figure(curves, title), out_dir / f"{name}.png"))
    if pca_loadings is not None:
        pca_loadings.to_csv(out_dir / "pca_heatmap.csv", float_format="%.6f")
        paths += [out_dir / "pca_heatmap.csv", _save(heatmap_figure(pca_loadings), out_dir / "pca_heatmap.png")]
    return paths
