"""JSON parameter checkpoints: every tensor with its shape, plus the model config."""
from __future__ import annotations

import json
from pathlib import Path

import torch

from .models import build_model

FORMAT_VERSION = 1


def save_checkpoint(model: torch.nn.Module, config: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {
        name: {"shape": list(t.shape), "dtype": str(t.dtype).removeprefix("torch."),
               "data": t.detach().reshape(-1).tolist()}
        for name, t in model.state_dict().items()
    }
    doc = {"format_version": FORMAT_VERSION, "config": config, "tensors": tensors}
    path.write_text(json.dumps(doc))
    return path


def load_checkpoint(path: str | Path) -> tuple[torch.nn.Module, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')}")
    cfg = doc["config"]
    model = build_model(cfg["kind"], cfg["in_dim"], tuple(cfg["relations"]), cfg["hidden"], cfg["heads"],
                        cfg.get("layers"), cfg.get("dropout", 0.0), cfg.get("seed", 0))
    state = {
        name: torch.tensor(t["data"], dtype=getattr(torch, t["dtype"])).reshape(t["shape"])
        for name, t in doc["tensors"].items()
    }
    dtype = next(iter(state.values())).dtype if state else torch.float32
    model.to(dtype).load_state_dict(state)
    return model, cfg
