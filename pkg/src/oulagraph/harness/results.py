"""Result rows keyed by (model, case, day, fold) and their line-delimited JSON store."""
from __future__ import annotations

import json
import math
import threading
from pathlib import Path
from typing import Iterable

import pandas as pd

KEY_FIELDS = ("model", "case", "day", "fold")
METRIC_FIELDS = ("train_accuracy", "train_f1", "val_accuracy", "val_f1")
ROW_FIELDS = KEY_FIELDS + METRIC_FIELDS + ("epochs", "seconds", "status")


def row_key(row: dict) -> tuple:
    return tuple(row[k] for k in KEY_FIELDS)


class ResultsTable:
    """In-memory result rows; later rows for the same key replace earlier ones."""

    def __init__(self, rows: Iterable[dict] = ()):
        self._rows: dict[tuple, dict] = {}
        for r in rows:
            self.add(r)

    def add(self, row: dict) -> None:
        if row.get("status", "ok") == "ok":
            for m in METRIC_FIELDS:
                v = row[m]
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{m}={v} outside [0, 1] for {row_key(row)}")
            if not row["seconds"] > 0:
                raise ValueError(f"non-positive runtime for {row_key(row)}")
        self._rows[row_key(row)] = row

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key: tuple) -> bool:
        return key in self._rows

    def rows(self) -> list[dict]:
        return [self._rows[k] for k in sorted(self._rows, key=lambda k: (str(k[0]), k[1], k[2], k[3]))]

    def frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.rows())
        if df.empty:
            return pd.DataFrame(columns=list(ROW_FIELDS))
        return df

    def fold_means(self) -> pd.DataFrame:
        """Mean over folds of each metric per (model, case, day), plus runtime sum and mean."""
        df = self.frame()
        df = df[df["status"] == "ok"]
        if df.empty:
            return pd.DataFrame(columns=["model", "case", "day", *METRIC_FIELDS, "seconds_mean", "seconds_sum", "n_folds"])
        g = df.groupby(["model", "case", "day"], sort=True)
        out = g[list(METRIC_FIELDS)].mean()
        out["seconds_mean"] = g["seconds"].mean()
        out["seconds_sum"] = g["seconds"].sum()
        out["n_folds"] = g.size()
        return out.reset_index()

    def missing(self, expected: Iterable[tuple]) -> list[tuple]:
        return [k for k in expected if k not in self._rows]


class ResultsStore:
    """Append-only ``results.jsonl``; one JSON object per row, flushed per write."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def load(self) -> ResultsTable:
        if not self.path.exists():
            return ResultsTable()
        rows = []
        with self.path.open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return ResultsTable(rows)

    def append(self, row: dict) -> None:
        clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()}
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(json.dumps(clean, sort_keys=True) + "\n")
                fh.flush()
