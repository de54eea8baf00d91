from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .baselines import BASELINES
from .grades import SNAPSHOT_DAYS
from .harness.grid import DEFAULT_GRID
from .harness.training import TrainConfig

GRAPH_MODELS = ("HAN", "HGT")
ALL_MODELS = BASELINES + GRAPH_MODELS


def schema() -> dict:
    return json.loads(resources.files("oulagraph").joinpath("data/run_config.schema.json").read_text())


@dataclass
class RunConfig:
    """Everything a sweep needs.  All randomness derives from ``seed``."""

    output_dir: str
    data_dir: str | None = None
    seed: int = 0
    models: list[str] = field(default_factory=lambda: list(ALL_MODELS))
    cases: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    days: list[int] = field(default_factory=lambda: list(SNAPSHOT_DAYS))
    folds: int = 5
    train: dict = field(default_factory=dict)
    grid: dict | None = field(default_factory=lambda: dict(DEFAULT_GRID))
    tune_day: int = 100
    tune_fold: int = 0
    # generate this many synthetic students instead of reading data_dir
    synthetic_students: int | None = None

    def __post_init__(self):
        jsonschema.validate(self.to_dict(), schema())
        unknown = set(self.models) - set(ALL_MODELS)
        if unknown:
            raise ValueError(f"unknown models {sorted(unknown)}")
        if not set(self.days) <= set(SNAPSHOT_DAYS):
            raise ValueError("days must be snapshot days")
        if self.tune_fold >= self.folds:
            raise ValueError("tune_fold out of range")
        self.train_config()

    def train_config(self) -> TrainConfig:
        kw = dict(self.train)
        if "betas" in kw:
            kw["betas"] = tuple(kw["betas"])
        return TrainConfig(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "RunConfig":
        doc = json.loads(Path(path).read_text())
        jsonschema.validate(doc, schema())
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)

    def dump(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path
