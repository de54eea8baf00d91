"""Registration graphs over the registration-student-registration metapath.

Student nodes are folded into their registrations: student attributes are
appended to each registration's features, and the R-S-R metapath becomes a
direct R-R relation linking every pair of registrations of the same student.
Every node also carries a self-loop, so a student with a single registration
has out-degree one.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .tabular import RegistrationEncoder

REGISTRATION_FEATURES = {
    1: ["partial_grade"],
    2: ["num_of_prev_attempts"],
    3: ["course_category", "code_module", "code_presentation"],
}
STUDENT_FEATURES = {
    4: ["highest_education", "studied_credits", "gender"],
    5: ["disability", "region", "age_band", "imd_band"],
}

RELATION = ("R", "same_student", "R")


@dataclass(frozen=True)
class FeatureCase:
    case_id: int
    registration_features: tuple[str, ...]
    student_features: tuple[str, ...]

    @property
    def features(self) -> tuple[str, ...]:
        return self.registration_features + self.student_features


def feature_case(case_id: int) -> FeatureCase:
    if case_id not in range(1, 6):
        raise ValueError(f"feature case must be 1..5, got {case_id}")
    reg = [f for c in sorted(REGISTRATION_FEATURES) if c <= case_id for f in REGISTRATION_FEATURES[c]]
    stu = [f for c in sorted(STUDENT_FEATURES) if c <= case_id for f in STUDENT_FEATURES[c]]
    return FeatureCase(case_id, tuple(reg), tuple(stu))


def case_columns(encoder: RegistrationEncoder, case: FeatureCase | int) -> list[int]:
    """Encoded column indices used by a feature case, in encoder order."""
    if isinstance(case, int):
        case = feature_case(case)
    cols = sorted(i for f in case.features for i in encoder.columns_of(f))
    return cols


@dataclass
class HeteroGraph:
    """Registration graph for one split.

    ``edge_index`` is a ``(2, E)`` integer array of directed (src, dst) pairs
    under the single relation ``RELATION``; self-loops come first, then the
    sibling edges in (src, dst) order.
    """

    x: np.ndarray
    y: np.ndarray
    edge_index: np.ndarray
    registration_ids: list[str]
    feature_names: list[str]
    split: str = "train"
    case_id: int = 5
    day: int = -1
    mask: np.ndarray | None = None
    node_type: str = "R"
    relations: tuple[tuple[str, str, str], ...] = (RELATION,)
    node_index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.node_index = {r: i for i, r in enumerate(self.registration_ids)}
        if self.mask is None:
            self.mask = np.ones(len(self.y), dtype=bool)

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_index.shape[1]

    def with_features(self, x: np.ndarray, feature_names: Sequence[str] | None = None) -> "HeteroGraph":
        return HeteroGraph(x, self.y, self.edge_index, self.registration_ids,
                           list(feature_names or self.feature_names), self.split, self.case_id, self.day,
                           self.mask, self.node_type, self.relations)

    def permute(self, perm: np.ndarray) -> "HeteroGraph":
        """Relabel nodes so that new node ``i`` is old node ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return HeteroGraph(self.x[perm], self.y[perm], inv[self.edge_index],
                           [self.registration_ids[i] for i in perm], self.feature_names, self.split,
                           self.case_id, self.day, self.mask[perm], self.node_type, self.relations)


def sibling_edges(student_ids: Sequence) -> np.ndarray:
    """Self-loops plus the complete digraph over each student's registrations."""
    student_ids = np.asarray(student_ids)
    n = len(student_ids)
    loops = np.arange(n)
    src, dst = [loops], [loops]
    order = np.argsort(student_ids, kind="mergesort")
    sorted_ids = student_ids[order]
    bounds = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1], True])
    pairs = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a > 1:
            members = order[a:b]
            for u in members:
                for v in members:
                    if u != v:
                        pairs.append((u, v))
    if pairs:
        p = np.array(sorted(pairs))
        src.append(p[:, 0])
        dst.append(p[:, 1])
    return np.vstack([np.concatenate(src), np.concatenate(dst)]).astype(np.int64)


def build_graph(
    rows: pd.DataFrame,
    case: FeatureCase | int,
    day: int,
    encoder: RegistrationEncoder,
    split: str = "train",
    scaler: tuple[np.ndarray, np.ndarray] | None = None,
) -> HeteroGraph:
    """Graph over the registrations in ``rows`` (one fold split of one day).

    ``scaler`` is an optional (mean, std) pair over the case columns applied to
    the node features; pass the training split's statistics when building the
    validation graph.
    """
    if isinstance(case, int):
        case = feature_case(case)
    cols = case_columns(encoder, case)
    x = encoder.transform(rows)[:, cols]
    if scaler is not None:
        mean, std = scaler
        x = (x - mean) / std
    names = [encoder.feature_names_out_[i] for i in cols]
    return HeteroGraph(
        x=x,
        y=rows["label"].to_numpy(dtype=np.int64),
        edge_index=sibling_edges(rows["id_student"].to_numpy()),
        registration_ids=list(rows["registration_id"]),
        feature_names=names,
        split=split,
        case_id=case.case_id,
        day=int(day),
    )


def feature_scaler(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    std = x.std(axis=0)
    return x.mean(axis=0), np.where(std > 1e-12, std, 1.0)


def build_split_graphs(
    rows: pd.DataFrame,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
    case: FeatureCase | int,
    day: int,
    encoder: RegistrationEncoder,
    standardize: bool = True,
) -> tuple[HeteroGraph, HeteroGraph]:
    """Independent train and validation graphs; no edges cross the split."""
    train_rows, val_rows = rows.iloc[train_idx], rows.iloc[val_idx]
    train = build_graph(train_rows, case, day, encoder, "train")
    val = build_graph(val_rows, case, day, encoder, "val")
    if standardize:
        mean, std = feature_scaler(train.x)
        train = train.with_features((train.x - mean) / std)
        val = val.with_features((val.x - mean) / std)
    return train, val


def graph_stats(g: HeteroGraph) -> dict:
    """Directed-edge statistics; degree is the out-degree including the self-loop."""
    deg = np.bincount(g.edge_index[0], minlength=g.num_nodes)
    hist = dict(sorted(Counter(deg.tolist()).items()))
    return {
        "node_count": g.num_nodes,
        "edge_count": g.num_edges,
        "avg_degree": g.num_edges / g.num_nodes if g.num_nodes else 0.0,
        "max_degree": int(deg.max()) if g.num_nodes else 0,
        "degree_histogram": hist,
    }


def dump_graph(g: HeteroGraph, out_dir: str | Path, stem: str = "graph") -> tuple[Path, Path]:
    """Write ``<stem>_edges.csv`` (src,dst) and ``<stem>_features.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    edges = out_dir / f"{stem}_edges.csv"
    pd.DataFrame(g.edge_index.T, columns=["src", "dst"]).to_csv(edges, index=False)
    feats = out_dir / f"{stem}_features.csv"
    df = pd.DataFrame(g.x, columns=g.feature_names)
    df.insert(0, "label", g.y)
    df.insert(0, "registration_id", g.registration_ids)
    df.to_csv(feats, index=False)
    return edges, feats
