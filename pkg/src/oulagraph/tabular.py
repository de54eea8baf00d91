"""Categorical encoding, stratified folds and PCA loadings for snapshot tables."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

logger = logging.getLogger(__name__)

MISSING_CATEGORY = "Missing"

NUMERIC = ["partial_grade", "num_of_prev_attempts", "studied_credits"]
LABEL_ENCODED = ["gender", "age_band", "imd_band", "disability", "course_category"]
ONE_HOT = ["highest_education", "region", "code_module", "code_presentation"]

# Natural orders for the ordered categoricals; anything else sorts lexically after these.
ORDERS = {
    "age_band": ["0-35", "35-55", "55<="],
    "imd_band": ["0-10%", "10-20", "10-20%", "20-30%", "30-40%", "40-50%", "50-60%", "60-70%",
                 "70-80%", "80-90%", "90-100%"],
    "highest_education": ["No Formal quals", "Lower Than A Level", "A Level or Equivalent",
                          "HE Qualification", "Post Graduate Qualification"],
    "disability": ["N", "Y"],
}


def _vocab(column: str, values: pd.Series) -> list[str]:
    seen = set(values)
    order = ORDERS.get(column, [])
    head = [v for v in order if v in seen]
    return head + sorted(seen - set(head))


def _categorical(values: pd.Series) -> pd.Series:
    return values.astype(object).where(values.notna(), MISSING_CATEGORY).astype(str)


@dataclass
class SnapshotDataset:
    day: int
    feature_matrix: np.ndarray
    column_names: list[str]
    labels: np.ndarray
    registration_ids: list[str]

    def __post_init__(self):
        n = self.feature_matrix.shape[0]
        if not (n == len(self.labels) == len(self.registration_ids)):
            raise ValueError("row, label and id counts differ")

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.feature_matrix, columns=self.column_names, index=self.registration_ids)


class RegistrationEncoder(BaseEstimator, TransformerMixin):
    """One-hot / label / passthrough encoding of registration rows.

    Column layout (fixed): the numeric passthrough columns, then the
    label-encoded categoricals, then one one-hot block per one-hot categorical
    named ``"<feature>=<value>"``.  Missing categorical cells are their own
    category.  Categories not seen during ``fit`` encode as an all-zero one-hot
    block, or ``-1`` in a label-encoded column.
    """

    def __init__(self, numeric: Sequence[str] = tuple(NUMERIC), label_encoded: Sequence[str] = tuple(LABEL_ENCODED),
                 one_hot: Sequence[str] = tuple(ONE_HOT)):
        self.numeric = numeric
        self.label_encoded = label_encoded
        self.one_hot = one_hot

    def fit(self, X: pd.DataFrame, y=None):
        self.vocab_ = {c: _vocab(c, _categorical(X[c])) for c in [*self.label_encoded, *self.one_hot]}
        names = list(self.numeric) + list(self.label_encoded)
        self.blocks_: dict[str, slice] = {}
        for c in self.one_hot:
            start = len(names)
            names += [f"{c}={v}" for v in self.vocab_[c]]
            self.blocks_[c] = slice(start, len(names))
        self.feature_names_out_ = names
        return self

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocab_")
        return np.asarray(self.feature_names_out_, dtype=object)

    def transform(self, X: pd.DataFrame) -> np.ndarray:
        check_is_fitted(self, "vocab_")
        out = np.zeros((len(X), len(self.feature_names_out_)))
        col = 0
        for c in self.numeric:
            out[:, col] = X[c].to_numpy(dtype=float)
            col += 1
        for c in self.label_encoded:
            lookup = {v: i for i, v in enumerate(self.vocab_[c])}
            vals = _categorical(X[c])
            codes = np.array([lookup.get(v, -1) for v in vals], dtype=float)
            if (codes < 0).any():
                logger.warning("%s: %d rows with unseen categories encoded as -1", c, int((codes < 0).sum()))
            out[:, col] = codes
            col += 1
        for c in self.one_hot:
            block = self.blocks_[c]
            lookup = {v: i for i, v in enumerate(self.vocab_[c])}
            vals = _categorical(X[c])
            idx = np.array([lookup.get(v, -1) for v in vals])
            unseen = idx < 0
            if unseen.any():
                logger.warning("%s: %d rows with unseen categories encoded as zeros", c, int(unseen.sum()))
            rows = np.flatnonzero(~unseen)
            out[rows, block.start + idx[~unseen]] = 1.0
        return out

    def inverse_transform(self, Z: np.ndarray) -> pd.DataFrame:
        """Recover the categorical (and numeric) values from an encoded matrix."""
        check_is_fitted(self, "vocab_")
        Z = np.asarray(Z)
        data: dict[str, list] = {}
        for j, c in enumerate(self.numeric):
            data[c] = Z[:, j].tolist()
        base = len(self.numeric)
        for j, c in enumerate(self.label_encoded):
            codes = Z[:, base + j].astype(int)
            data[c] = [self.vocab_[c][k] if k >= 0 else None for k in codes]
        for c in self.one_hot:
            block = Z[:, self.blocks_[c]]
            hot = block.argmax(axis=1)
            data[c] = [self.vocab_[c][k] if block[i, k] > 0.5 else None for i, k in enumerate(hot)]
        return pd.DataFrame(data)

    def columns_of(self, feature: str) -> list[int]:
        """Indices of the encoded columns derived from a raw feature."""
        check_is_fitted(self, "vocab_")
        if feature in self.blocks_:
            return list(range(self.blocks_[feature].start, self.blocks_[feature].stop))
        return [self.feature_names_out_.index(feature)]


def encode(records: pd.DataFrame, encoder: RegistrationEncoder | None = None, day: int = -1) -> SnapshotDataset:
    """Encode one snapshot table; fits a fresh encoder when none is supplied."""
    if encoder is None:
        encoder = RegistrationEncoder().fit(records)
    return SnapshotDataset(
        day=int(day),
        feature_matrix=encoder.transform(records),
        column_names=list(encoder.feature_names_out_),
        labels=records["label"].to_numpy(dtype=int),
        registration_ids=list(records["registration_id"]),
    )


# --------------------------------------------------------------------------- folds


@dataclass
class FoldAssignment:
    fold_of: dict[str, int]
    seed: int
    k: int = 5

    def folds(self, registration_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.fold_of[r] for r in registration_ids])

    def split(self, registration_ids: Sequence[str], fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train indices, validation indices) into ``registration_ids`` for ``fold``."""
        f = self.folds(registration_ids)
        return np.flatnonzero(f != fold), np.flatnonzero(f == fold)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(sorted(self.fold_of.items()), columns=["registration_id", "fold"])

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path

    @classmethod
    def from_csv(cls, path: str | Path, seed: int = -1, k: int = 5) -> "FoldAssignment":
        df = pd.read_csv(path, dtype={"registration_id": str})
        return cls(dict(zip(df["registration_id"], df["fold"].astype(int))), seed, k)


def make_folds(registration_ids: Sequence[str], labels: Sequence[int], seed: int, k: int = 5) -> FoldAssignment:
    """Shuffled, label-stratified k-way partition.

    Rows are shuffled within each label, the labels are laid end to end and
    folds are dealt round-robin, so overall fold sizes differ by at most one and
    each label is spread as evenly as possible.
    """
    ids = list(registration_ids)
    if not ids:
        raise ValueError("cannot fold an empty dataset")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    order = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        order.extend(members[rng.permutation(len(members))])
    fold_of = {ids[i]: pos % k for pos, i in enumerate(order)}
    return FoldAssignment(fold_of, seed, k)


# --------------------------------------------------------------------------- PCA


class PCALoadings(BaseEstimator, TransformerMixin):
    """PCA on the column-standardised matrix, keeping feature loadings.

    Constant columns are dropped before standardising.  ``components_`` holds
    orthonormal directions (rows) over ``kept_columns_``; ``loadings_`` are the
    components scaled by the square root of their explained variance.
    """

    def __init__(self, n_components: int | None = None):
        self.n_components = n_components

    def fit(self, X, y=None, column_names: Sequence[str] | None = None):
        X = np.asarray(X, dtype=float)
        names = list(column_names) if column_names is not None else [f"x{i}" for i in range(X.shape[1])]
        std = X.std(axis=0)
        keep = std > 1e-12
        self.kept_columns_ = [n for n, k in zip(names, keep) if k]
        self.keep_mask_ = keep
        self.mean_ = X[:, keep].mean(axis=0)
        self.scale_ = std[keep]
        Z = (X[:, keep] - self.mean_) / self.scale_
        _, s, vt = np.linalg.svd(Z, full_matrices=False)
        rank = int(np.sum(s > s.max() * max(Z.shape) * np.finfo(float).eps)) if s.size else 0
        k = rank if self.n_components is None else min(self.n_components, rank)
        var = s ** 2 / max(len(Z) - 1, 1)
        total = var.sum()
        # sign convention: largest-magnitude entry of each component is positive
        signs = np.sign(vt[np.arange(len(vt)), np.abs(vt).argmax(axis=1)])
        vt = vt * signs[:, None]
        self.components_ = vt[:k]
        self.explained_variance_ = var[:k]
        self.explained_variance_ratio_ = var[:k] / total if total > 0 else np.zeros(k)
        self.loadings_ = (self.components_ * np.sqrt(self.explained_variance_)[:, None]).T
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return ((X[:, self.keep_mask_] - self.mean_) / self.scale_) @ self.components_.T

    def inverse_transform(self, T):
        """Map scores back to the kept original columns."""
        return np.asarray(T) @ self.components_ * self.scale_ + self.mean_

    def loadings_frame(self) -> pd.DataFrame:
        cols = [f"PC{i + 1}" for i in range(self.components_.shape[0])]
        return pd.DataFrame(self.loadings_, index=self.kept_columns_, columns=cols)


def pca_loadings(feature_matrix, n_components: int | None = None, column_names: Sequence[str] | None = None):
    """(loading frame, explained variance ratios) of the standardised matrix."""
    pca = PCALoadings(n_components).fit(feature_matrix, column_names=column_names)
    return pca.loadings_frame(), pca.explained_variance_ratio_
