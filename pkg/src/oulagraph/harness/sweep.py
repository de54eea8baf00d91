"""Data preparation and the (model, case, day, fold) sweep."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from .. import ingest, synthetic
from ..baselines import BASELINES, BaselineClassifier
from ..grades import SNAPSHOT_DAYS, PassWeightModel, build_snapshots, read_snapshots, write_snapshots, write_weights
from ..graph import build_split_graphs
from ..nn.checkpoint import save_checkpoint
from ..tabular import FoldAssignment, RegistrationEncoder, make_folds
from .grid import grid_search
from .metrics import compute_metrics
from .results import ResultsStore, ResultsTable
from .training import TrainConfig, evaluate, train_gnn

logger = logging.getLogger(__name__)

BASELINE_CASE = 5


@dataclass
class Prepared:
    records: pd.DataFrame
    snapshots: dict[int, pd.DataFrame]
    encoder: RegistrationEncoder
    folds: FoldAssignment
    pass_model: PassWeightModel | None = None
    report: ingest.PreprocessReport | None = None


def load_tables(config) -> ingest.OulaTables:
    if config.synthetic_students:
        out = Path(config.output_dir) / "synthetic_data"
        synthetic.write(out, config.synthetic_students, config.seed)
        return ingest.load_oula(out)
    if not config.data_dir:
        raise ValueError("no data_dir configured")
    return ingest.load_oula(config.data_dir)


def prepare(config, force: bool = False, tables: ingest.OulaTables | None = None) -> Prepared:
    """Canonical table, 13 snapshots, encoder and folds; cached under ``output_dir``.

    Cached files are reused unless ``force``; a fresh run writes
    ``canonical.csv``, ``weights.csv``, ``snapshots/snapshot_d{day}.csv`` and
    ``folds.csv``.
    """
    out = Path(config.output_dir)
    canon = out / "canonical.csv"
    snap_dir = out / "snapshots"
    folds_path = out / "folds.csv"
    cached = canon.exists() and folds_path.exists() and all(
        (snap_dir / f"snapshot_d{d}.csv").exists() for d in SNAPSHOT_DAYS
    )
    pass_model = report = None
    if cached and not force:
        records = ingest.read_canonical(canon)
        snaps = read_snapshots(snap_dir)
        folds = FoldAssignment.from_csv(folds_path, config.seed, config.folds)
    else:
        tables = tables or load_tables(config)
        records, report = ingest.preprocess_with_report(*tables, tables.registrations)
        pass_model = report.pass_model
        snaps = build_snapshots(records, tables.assessments, tables.submissions)
        folds = make_folds(records["registration_id"], records["label"], config.seed, config.folds)
        ingest.write_canonical(records, canon)
        write_weights(pass_model, out / "weights.csv")
        write_snapshots(snaps, snap_dir)
        folds.to_csv(folds_path)
    encoder = RegistrationEncoder().fit(snaps[SNAPSHOT_DAYS[-1]])
    return Prepared(records, snaps, encoder, folds, pass_model, report)


def _row(model, case, day, fold, train_m=None, val_m=None, epochs=0, seconds=0.0, status="ok", **extra) -> dict:
    row = {"model": model, "case": int(case), "day": int(day), "fold": int(fold),
           "train_accuracy": train_m.accuracy if train_m else float("nan"),
           "train_f1": train_m.f1_weighted if train_m else float("nan"),
           "val_accuracy": val_m.accuracy if val_m else float("nan"),
           "val_f1": val_m.f1_weighted if val_m else float("nan"),
           "epochs": int(epochs), "seconds": float(seconds), "status": status}
    row.update(extra)
    return row


def run_baseline(name: str, X: np.ndarray, y: np.ndarray, tr: np.ndarray, va: np.ndarray, seed: int) -> dict:
    t0 = time.perf_counter()
    clf = BaselineClassifier(name, None, seed).fit(X[tr], y[tr])
    train_pred, val_pred = clf.predict(X[tr]), clf.predict(X[va])
    seconds = time.perf_counter() - t0
    return dict(train_m=compute_metrics(y[tr], train_pred), val_m=compute_metrics(y[va], val_pred),
                epochs=0, seconds=seconds)


def run_graph_model(kind: str, train_graph, val_graph, config: TrainConfig, checkpoint: Path | None = None) -> dict:
    res = train_gnn(train_graph, val_graph, kind.lower(), config)
    if checkpoint is not None:
        save_checkpoint(res.model, {"kind": kind.lower(), "in_dim": train_graph.x.shape[1],
                                    "relations": list(res.model.relations if hasattr(res.model, "relations")
                                                      else res.model.metapaths),
                                    "hidden": config.hidden, "heads": config.heads, "layers": config.layers,
                                    "dropout": config.dropout, "seed": config.seed,
                                    "train": config.to_dict()}, checkpoint)
    train_m, _ = evaluate(res.model, train_graph, config.dtype)
    val_m, _ = evaluate(res.model, val_graph, config.dtype)
    return dict(train_m=train_m, val_m=val_m, epochs=res.epochs_run, seconds=res.seconds,
                best_epoch=res.best_epoch)


def _tuning_path(config) -> Path:
    return Path(config.output_dir) / "tuning.json"


def tuned_point(config, prepared: Prepared, kind: str, case: int, cache: dict) -> dict:
    """Grid-searched hyperparameters for (kind, case), tuned once on the tuning day and fold."""
    key = f"{kind}|{case}"
    if key in cache:
        return cache[key]
    if not config.grid:
        cache[key] = {}
        return cache[key]
    snap = prepared.snapshots[config.tune_day]
    tr, va = prepared.folds.split(snap["registration_id"], config.tune_fold)
    graphs = build_split_graphs(snap, tr, va, case, config.tune_day, prepared.encoder)
    point, evals = grid_search(kind.lower(), config.grid, graphs, config.train_config())
    logger.info("%s case %d tuned: %s", kind, case, point)
    cache[key] = point
    if config.output_dir:
        path = _tuning_path(config)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(cache, indent=2, sort_keys=True))
    return point


def expected_keys(config) -> list[tuple]:
    keys = []
    for day in config.days:
        for fold in range(config.folds):
            for m in config.models:
                cases = [BASELINE_CASE] if m in BASELINES else config.cases
                keys += [(m, c, day, fold) for c in cases]
    return keys


def run_sweep(config, prepared: Prepared | None = None, store: ResultsStore | None = None,
              progress: Callable[[dict], None] | None = None, resume: bool = True,
              checkpoint_dir: Path | None = None) -> ResultsTable:
    """Run every missing (model, case, day, fold) cell; failures are recorded and skipped.

    With ``resume`` the rows already in ``store`` are kept and skipped;
    otherwise every cell is recomputed and the new rows supersede the old.
    """
    prepared = prepared or prepare(config)
    table = store.load() if store and resume else ResultsTable()
    tuning: dict = {}
    if store and _tuning_path(config).exists():
        tuning = json.loads(_tuning_path(config).read_text())
    base_cfg = config.train_config()

    def record(row):
        table.add(row)
        if store:
            store.append(row)
        if progress:
            progress(row)

    for day in config.days:
        snap = prepared.snapshots[day]
        ids = snap["registration_id"]
        X = prepared.encoder.transform(snap)
        y = snap["label"].to_numpy(dtype=int)
        for fold in range(config.folds):
            tr, va = prepared.folds.split(ids, fold)
            seed = config.seed * 1000 + fold
            for name in config.models:
                if name not in BASELINES or (name, BASELINE_CASE, day, fold) in table:
                    continue
                try:
                    record(_row(name, BASELINE_CASE, day, fold, **run_baseline(name, X, y, tr, va, seed)))
                except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
                    logger.exception("%s day %d fold %d failed", name, day, fold)
                    record(_row(name, BASELINE_CASE, day, fold, status="failed", error=str(exc)))
            for kind in config.models:
                if kind in BASELINES:
                    continue
                for case in config.cases:
                    if (kind, case, day, fold) in table:
                        continue
                    try:
                        point = tuned_point(config, prepared, kind, case, tuning)
                        cfg = base_cfg.with_point({**point, "seed": seed})
                        graphs = build_split_graphs(snap, tr, va, case, day, prepared.encoder)
                        ckpt = None
                        if checkpoint_dir is not None:
                            ckpt = Path(checkpoint_dir) / f"{kind}_case{case}_d{day}_fold{fold}.json"
                        out = run_graph_model(kind, *graphs, cfg, ckpt)
                        record(_row(kind, case, day, fold, **out, hyperparameters=point))
                    except Exception as exc:  # noqa: BLE001
                        logger.exception("%s case %d day %d fold %d failed", kind, case, day, fold)
                        record(_row(kind, case, day, fold, status="failed", error=str(exc)))
    return table
