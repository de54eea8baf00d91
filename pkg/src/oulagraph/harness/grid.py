from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

from ..graph import HeteroGraph
from .training import TrainConfig, TrainingDiverged, evaluate, train_gnn

logger = logging.getLogger(__name__)

DEFAULT_GRID = {
    "lr": [1e-3, 5e-3],
    "hidden": [32, 64],
    "heads": [4, 8],
    "dropout": [0.0, 0.3],
}


def grid_points(grid: dict[str, list]) -> list[dict]:
    """Every combination, keys sorted, values in the order given (lexicographic grid order)."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be non-empty")
    keys = sorted(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


@dataclass
class GridEvaluation:
    point: dict
    val_f1: float | None
    val_loss: float | None
    error: str | None = None


def grid_search(model_kind: str, grid: dict[str, list], one_fold_data: tuple[HeteroGraph, HeteroGraph],
                base: TrainConfig | None = None) -> tuple[dict, list[GridEvaluation]]:
    """Exhaustive search on one (train, validation) split.

    Picks the highest validation F1, then the lower validation loss, then the
    earlier grid point.  Points whose configuration is invalid or whose
    training diverges are recorded as failed.
    """
    base = base or TrainConfig()
    train_graph, val_graph = one_fold_data
    evals: list[GridEvaluation] = []
    for point in grid_points(grid):
        try:
            cfg = base.with_point(point)
            res = train_gnn(train_graph, val_graph, model_kind, cfg)
            m, loss = evaluate(res.model, val_graph, cfg.dtype)
            evals.append(GridEvaluation(point, m.f1_weighted, loss))
        except (ValueError, TrainingDiverged) as exc:
            logger.warning("grid point %s failed: %s", point, exc)
            evals.append(GridEvaluation(point, None, None, str(exc)))
    ok = [(i, e) for i, e in enumerate(evals) if e.error is None]
    if not ok:
        raise RuntimeError(f"all {len(evals)} grid points failed for {model_kind}")
    _, best = min(ok, key=lambda ie: (-ie[1].val_f1, ie[1].val_loss, ie[0]))
    return best.point, evals
