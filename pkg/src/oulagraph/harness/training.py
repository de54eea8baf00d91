"""Full-graph training of HAN/HGT with Adam and early stopping on validation loss."""
from __future__ import annotations

import copy
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted
from torch.nn import functional as F

from ..graph import HeteroGraph
from ..nn.models import GraphTensors, build_model
from .metrics import Metrics, compute_metrics

logger = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    max_epochs: int = 800
    patience: int = 100
    seed: int = 0
    hidden: int = 64
    heads: int = 8
    layers: int | None = None
    dropout: float = 0.0
    dtype: str = "float32"
    grid: dict[str, list] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not 0 < self.patience < self.max_epochs:
            raise ValueError(f"need 0 < patience < max_epochs, got {self.patience}, {self.max_epochs}")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {sorted(DTYPES)}")

    def with_point(self, point: dict[str, Any]) -> "TrainConfig":
        return replace(self, **point)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


class EarlyStopping:
    """Tracks the best monitored loss; stops after ``patience`` epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.best_epoch = 0
        self.epoch = 0
        self.since_best = 0

    def update(self, loss: float) -> bool:
        """Record one epoch; True when it improved on the best so far."""
        self.epoch += 1
        if loss < self.best:
            self.best, self.best_epoch, self.since_best = loss, self.epoch, 0
            return True
        self.since_best += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.since_best >= self.patience


@dataclass
class TrainResult:
    model: torch.nn.Module
    history: list[dict]
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    seconds: float


def _tensors(g: HeteroGraph, dtype) -> GraphTensors:
    return GraphTensors.from_graph(g, dtype)


def train_gnn(train_graph: HeteroGraph, val_graph: HeteroGraph | None, model_kind: str, config: TrainConfig) -> TrainResult:
    """Train with Adam, monitoring validation loss; returns the best-epoch parameters.

    Without a validation graph the training loss is monitored instead.
    Raises :class:`TrainingDiverged` on a non-finite loss.
    """
    if val_graph is not None and val_graph.x.shape[1] != train_graph.x.shape[1]:
        raise ValueError("train and validation graphs have different feature widths")
    dtype = DTYPES[config.dtype]
    torch.manual_seed(config.seed)
    tg = _tensors(train_graph, dtype)
    vg = _tensors(val_graph, dtype) if val_graph is not None else tg
    train_mask = torch.as_tensor(train_graph.mask, dtype=torch.bool)
    val_mask = torch.as_tensor(val_graph.mask if val_graph is not None else train_graph.mask, dtype=torch.bool)

    model = build_model(model_kind, train_graph.x.shape[1], tuple(tg.edges), config.hidden, config.heads,
                        config.layers, config.dropout, config.seed).to(dtype)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, betas=config.betas, eps=config.eps,
                           weight_decay=config.weight_decay)
    stopper = EarlyStopping(config.patience)
    best_state = copy.deepcopy(model.state_dict())
    history = []
    t0 = time.perf_counter()
    for epoch in range(1, config.max_epochs + 1):
        model.train()
        opt.zero_grad()
        logits = model(tg)
        loss = F.cross_entropy(logits[train_mask], tg.y[train_mask])
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite training loss at epoch {epoch}")
        loss.backward()
        opt.step()

        model.eval()
        with torch.no_grad():
            vlogits = model(vg)
            vloss = F.cross_entropy(vlogits[val_mask], vg.y[val_mask]).item()
        if not np.isfinite(vloss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        vm = compute_metrics(vg.y[val_mask].numpy(), vlogits[val_mask].argmax(1).numpy())
        history.append({"epoch": epoch, "train_loss": loss.item(), "val_loss": vloss,
                        "val_accuracy": vm.accuracy, "val_f1": vm.f1_weighted})
        if stopper.update(vloss):
            best_state = copy.deepcopy(model.state_dict())
        if stopper.should_stop:
            break
    seconds = time.perf_counter() - t0
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model, history, stopper.best_epoch, stopper.best, stopper.epoch, seconds)


def evaluate(model: torch.nn.Module, g: HeteroGraph, dtype: str = "float32") -> tuple[Metrics, float]:
    """(metrics, mean loss) of a trained model on the masked nodes of ``g``."""
    gt = _tensors(g, DTYPES[dtype])
    mask = torch.as_tensor(g.mask, dtype=torch.bool)
    model.eval()
    with torch.no_grad():
        logits = model(gt)
        loss = F.cross_entropy(logits[mask], gt.y[mask]).item()
    return compute_metrics(gt.y[mask].numpy(), logits[mask].argmax(1).numpy()), loss


class GraphNodeClassifier(ClassifierMixin, BaseEstimator):
    """HAN or HGT node classifier with an estimator interface.

    ``fit`` takes a training :class:`~oulagraph.graph.HeteroGraph` and an
    optional validation graph used for early stopping; ``predict`` maps a graph
    to one label per node.
    """

    def __init__(self, model: str = "hgt", hidden: int = 64, heads: int = 8, layers: int | None = None,
                 dropout: float = 0.0, lr: float = 5e-3, weight_decay: float = 0.0, max_epochs: int = 800,
                 patience: int = 100, random_state: int = 0, dtype: str = "float32"):
        self.model = model
        self.hidden = hidden
        self.heads = heads
        self.layers = layers
        self.dropout = dropout
        self.lr = lr
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.random_state = random_state
        self.dtype = dtype

    def train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, weight_decay=self.weight_decay, max_epochs=self.max_epochs,
                           patience=self.patience, seed=self.random_state, hidden=self.hidden, heads=self.heads,
                           layers=self.layers, dropout=self.dropout, dtype=self.dtype)

    def fit(self, X: HeteroGraph, y=None, val_graph: HeteroGraph | None = None):
        res = train_gnn(X, val_graph, self.model, self.train_config())
        self.module_ = res.model
        self.history_ = res.history
        self.best_epoch_ = res.best_epoch
        self.best_val_loss_ = res.best_val_loss
        self.n_epochs_ = res.epochs_run
        self.fit_seconds_ = res.seconds
        self.n_features_in_ = X.x.shape[1]
        self.classes_ = np.array([0, 1])
        return self

    def _logits(self, g: HeteroGraph) -> torch.Tensor:
        check_is_fitted(self, "module_")
        if g.x.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} node features, got {g.x.shape[1]}")
        self.module_.eval()
        with torch.no_grad():
            return self.module_(_tensors(g, DTYPES[self.dtype]))

    def predict_proba(self, X: HeteroGraph) -> np.ndarray:
        return torch.softmax(self._logits(X), dim=1).numpy()

    def predict(self, X: HeteroGraph) -> np.ndarray:
        return self._logits(X).argmax(1).numpy()

    def score(self, X: HeteroGraph, y=None, sample_weight=None) -> float:
        y = X.y if y is None else y
        return compute_metrics(y, self.predict(X)).accuracy
