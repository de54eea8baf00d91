from .grid import DEFAULT_GRID, grid_points, grid_search
from .metrics import Metrics, compute_metrics
from .results import ResultsStore, ResultsTable
from .training import EarlyStopping, GraphNodeClassifier, TrainConfig, TrainingDiverged, evaluate, train_gnn

__all__ = [
    "DEFAULT_GRID", "grid_points", "grid_search", "Metrics", "compute_metrics", "ResultsStore", "ResultsTable",
    "EarlyStopping", "GraphNodeClassifier", "TrainConfig", "TrainingDiverged", "evaluate", "train_gnn",
]
