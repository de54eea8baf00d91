"""Command-line entry point: ``oulagraph <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import pandas as pd

from . import ingest, synthetic
from .baselines import BASELINES
from .config import GRAPH_MODELS, RunConfig
from .grades import SNAPSHOT_DAYS, PassWeightModel, build_snapshots, grade_inputs, write_snapshots, write_weights
from .graph import build_split_graphs, dump_graph, graph_stats
from .harness.results import ResultsStore
from .harness.sweep import expected_keys, prepare, run_sweep
from .report import emit_plots, emit_tables
from .tabular import PCALoadings, make_folds, RegistrationEncoder

logger = logging.getLogger("oulagraph")

SUBCOMMANDS = ("preprocess", "snapshots", "baselines", "graphs", "train-gnn", "sweep", "report", "synthesize")


class UsageError(Exception):
    pass


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from exc


def _str_list(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--data-dir", type=Path, help="directory holding the OULAD CSV files")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--models", type=_str_list, help="comma-separated model names")
    common.add_argument("--cases", type=_int_list, help="comma-separated feature cases (1-5)")
    common.add_argument("--days", type=_int_list, help="comma-separated snapshot days")
    common.add_argument("--force", action="store_true", help="recompute existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="oulagraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "preprocess": "ingest the OULAD files and write the canonical registration table",
        "snapshots": "write the 13 Partial Grade snapshots, weights.csv, folds.csv and PCA loadings",
        "baselines": "run the nine classical baselines over days and folds",
        "graphs": "build registration graphs and report their statistics",
        "train-gnn": "train HAN/HGT over cases, days and folds (with checkpoints)",
        "sweep": "run every configured model; resumes from results.jsonl",
        "report": "emit tables 4-7 and figures from results.jsonl",
        "synthesize": "write a synthetic dataset in the OULAD file layout",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "synthesize":
            p.add_argument("--students", type=int, default=400)
    return parser


def load_config(args) -> RunConfig:
    overrides = {
        "data_dir": str(args.data_dir) if args.data_dir else None,
        "output_dir": str(args.out) if args.out else None,
        "seed": args.seed,
        "models": args.models,
        "cases": args.cases,
        "days": args.days,
    }
    try:
        if args.config:
            if not args.config.is_file():
                raise UsageError(f"config file not found: {args.config}")
            return RunConfig.from_json(args.config, **overrides)
        if not overrides["output_dir"]:
            raise UsageError("either --config or --out is required")
        return RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    except (jsonschema.ValidationError, ValueError, TypeError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        raise UsageError(f"invalid configuration: {msg}") from exc


def cmd_preprocess(cfg: RunConfig, force: bool) -> int:
    out = Path(cfg.output_dir)
    canon = out / "canonical.csv"
    if canon.exists() and not force:
        recs = ingest.read_canonical(canon)
        print(f"canonical table exists ({len(recs)} records); use --force to rebuild")
        return 0
    from .harness.sweep import load_tables

    tables = load_tables(cfg)
    recs, report = ingest.preprocess_with_report(*tables, tables.registrations)
    ingest.write_canonical(recs, canon)
    (out / "preprocess_report.json").write_text(json.dumps({
        "n_input": report.n_input, "n_output": report.n_output, "n_students": report.n_students,
        "dropped_duplicates": report.dropped_duplicates, "dropped_no_grades": report.dropped_no_grades,
        "dropped_early_withdrawal": report.dropped_early_withdrawal,
        "dropped_threshold_inconsistent": report.dropped_threshold_inconsistent,
        "label_share": report.label_share, "rejected_rows": len(tables.rejections),
        "weight_warnings": tables.warnings,
        "mean_exam_share": report.pass_model.mean_exam_share() if report.pass_model else None,
    }, indent=2))
    print(f"preprocessed: {report.summary()}")
    return 0


def cmd_snapshots(cfg: RunConfig, force: bool) -> int:
    out = Path(cfg.output_dir)
    snap_dir = out / "snapshots"
    done = all((snap_dir / f"snapshot_d{d}.csv").exists() for d in SNAPSHOT_DAYS) and (out / "weights.csv").exists()
    if done and not force:
        print("snapshots exist; use --force to rebuild")
        return 0
    canon = out / "canonical.csv"
    if not canon.exists():
        cmd_preprocess(cfg, force)
    recs = ingest.read_canonical(canon)
    from .harness.sweep import load_tables

    tables = load_tables(cfg)
    model = PassWeightModel().fit(grade_inputs(recs, tables.assessments, tables.submissions))
    write_weights(model, out / "weights.csv")
    snaps = build_snapshots(recs, tables.assessments, tables.submissions)
    write_snapshots(snaps, snap_dir)
    folds = make_folds(recs["registration_id"], recs["label"], cfg.seed, cfg.folds)
    folds.to_csv(out / "folds.csv")
    last = snaps[SNAPSHOT_DAYS[-1]]
    enc = RegistrationEncoder().fit(last)
    pca = PCALoadings(10).fit(enc.transform(last), column_names=enc.feature_names_out_)
    pca.loadings_frame().to_csv(out / "pca_loadings.csv", float_format="%.6f")
    print(f"wrote {len(snaps)} snapshots, weights for {len(model.weights_)} presentations "
          f"(mean exam share {model.mean_exam_share():.3f}), folds and PCA loadings")
    return 0


def _sweep(cfg: RunConfig, force: bool, models: list[str], checkpoints: bool = False) -> int:
    cfg.models = [m for m in cfg.models if m in models] or [m for m in models if m in cfg.models]
    if not cfg.models:
        raise UsageError("no models selected")
    prepared = prepare(cfg)
    store = ResultsStore(Path(cfg.output_dir) / "results.jsonl")
    ckpt = Path(cfg.output_dir) / "checkpoints" if checkpoints else None
    table = run_sweep(cfg, prepared, store, resume=not force, checkpoint_dir=ckpt,
                      progress=lambda r: logger.info("%s case %s day %s fold %s: val F1 %s",
                                                     r["model"], r["case"], r["day"], r["fold"], r.get("val_f1")))
    missing = table.missing(expected_keys(cfg))
    failed = sum(1 for r in table.rows() if r.get("status") != "ok")
    print(f"{len(table)} result rows; {len(missing)} missing, {failed} failed")
    return 0 if not missing else 1


def cmd_graphs(cfg: RunConfig, force: bool) -> int:
    prepared = prepare(cfg)
    rows = []
    out = Path(cfg.output_dir) / "graphs"
    for day in cfg.days:
        snap = prepared.snapshots[day]
        for fold in range(cfg.folds):
            tr, va = prepared.folds.split(snap["registration_id"], fold)
            for case in cfg.cases:
                train, val = build_split_graphs(snap, tr, va, case, day, prepared.encoder)
                for g in (train, val):
                    s = graph_stats(g)
                    rows.append({"day": day, "fold": fold, "case": case, "split": g.split,
                                 **{k: v for k, v in s.items() if k != "degree_histogram"},
                                 "degree_histogram": json.dumps(s["degree_histogram"])})
                    if day == cfg.days[0] and case == cfg.cases[-1]:
                        dump_graph(g, out, f"fold{fold}_{g.split}")
    stats = pd.DataFrame(rows)
    out.mkdir(parents=True, exist_ok=True)
    stats.to_csv(out / "graph_stats.csv", index=False)
    first = stats[(stats["day"] == cfg.days[0]) & (stats["case"] == cfg.cases[-1])]
    for _, r in first.iterrows():
        print(f"fold {r['fold']} {r['split']}: {r['node_count']} nodes, {r['edge_count']} edges, "
              f"avg degree {r['avg_degree']:.3f}, max degree {r['max_degree']}")
    return 0


def cmd_report(cfg: RunConfig, force: bool) -> int:
    out = Path(cfg.output_dir)
    table = ResultsStore(out / "results.jsonl").load()
    if not len(table) or table.fold_means().empty:
        print("no results to report", file=sys.stderr)
        return 1
    loadings = None
    if (out / "pca_loadings.csv").exists():
        loadings = pd.read_csv(out / "pca_loadings.csv", index_col=0)
    paths = emit_tables(table, out) + emit_plots(table, out, loadings)
    print(f"wrote {len(paths)} report files to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "synthesize":
            if not args.out:
                raise UsageError("--out is required")
            synthetic.write(args.out, args.students, args.seed or 0)
            print(f"wrote synthetic OULAD files for {args.students} students to {args.out}")
            return 0
        cfg = load_config(args)
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        if args.command == "preprocess":
            return cmd_preprocess(cfg, args.force)
        if args.command == "snapshots":
            return cmd_snapshots(cfg, args.force)
        if args.command == "baselines":
            return _sweep(cfg, args.force, list(BASELINES))
        if args.command == "graphs":
            return cmd_graphs(cfg, args.force)
        if args.command == "train-gnn":
            return _sweep(cfg, args.force, list(GRAPH_MODELS), checkpoints=True)
        if args.command == "sweep":
            return _sweep(cfg, args.force, list(cfg.models))
        if args.command == "report":
            return cmd_report(cfg, args.force)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"oulagraph: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"oulagraph: error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
