"""Pass-model weights and the dynamic Partial Grade feature.

The final grade of a registration is modelled as ``alpha * x + beta * y >= 40``
where ``x`` is the end-of-semester weighted assessment grade and ``y`` the exam
score.  ``alpha`` and ``beta`` are recovered per course presentation from a
two-feature logistic fit whose decision boundary is rescaled so the weights sum
to one.  The Partial Grade at a snapshot day is the weighted assessment grade
restricted to assessments due by that day; exams never contribute.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

logger = logging.getLogger(__name__)

PASS_THRESHOLD = 40.0

SNAPSHOTS: tuple[tuple[int, int], ...] = (
    (20, 7), (40, 15), (60, 23), (80, 30), (100, 38), (120, 46), (140, 54),
    (160, 60), (180, 70), (200, 77), (220, 85), (240, 93), (260, 100),
)
SNAPSHOT_DAYS: tuple[int, ...] = tuple(d for d, _ in SNAPSHOTS)

KEY = ["id_student", "code_module", "code_presentation"]


def snapshot_days() -> list[tuple[int, int]]:
    """The 13 (day, percent-of-semester) checkpoints."""
    return list(SNAPSHOTS)


def weighted_assessment_grade(
    subs: pd.DataFrame | Iterable[Mapping],
    defs: pd.DataFrame | Iterable[Mapping],
    cutoff_day: float | None,
) -> float:
    """Weighted assessment grade of a single registration.

    ``defs`` are the assessments of the registration's course presentation and
    ``subs`` its submissions.  Only non-exam assessments due on or before
    ``cutoff_day`` count (``None`` means end of semester); unsubmitted or
    unscored work counts as 0.  The result is clamped to [0, 100].
    """
    defs = pd.DataFrame(defs)
    subs = pd.DataFrame(subs)
    if defs.empty:
        return 0.0
    scores: dict[int, float] = {}
    if not subs.empty:
        for aid, score in zip(subs["id_assessment"], subs["score"]):
            if score is not None and not pd.isna(score):
                scores[int(aid)] = float(score)
    total = 0.0
    for aid, atype, due, weight in zip(
        defs["id_assessment"], defs["assessment_type"], defs["due_day"], defs["weight"]
    ):
        if atype == "Exam":
            continue
        if cutoff_day is not None and (pd.isna(due) or due > cutoff_day):
            continue
        total += float(weight) / 100.0 * scores.get(int(aid), 0.0)
    return float(min(max(total, 0.0), 100.0))


def _scored_submissions(defs: pd.DataFrame, subs: pd.DataFrame) -> pd.DataFrame:
    cols = ["id_assessment", "code_module", "code_presentation", "assessment_type", "due_day", "weight"]
    merged = subs[["id_assessment", "id_student", "score"]].merge(defs[cols], on="id_assessment", how="inner")
    merged["score"] = merged["score"].fillna(0.0)
    return merged


def partial_grades(
    records: pd.DataFrame,
    defs: pd.DataFrame,
    subs: pd.DataFrame,
    cutoff_day: float | None,
) -> pd.Series:
    """Vectorised :func:`weighted_assessment_grade` for every row of ``records``."""
    scored = _scored_submissions(defs, subs)
    mask = scored["assessment_type"] != "Exam"
    if cutoff_day is not None:
        mask &= scored["due_day"].notna() & (scored["due_day"] <= cutoff_day)
    scored = scored[mask]
    contrib = (scored["weight"] / 100.0 * scored["score"]).groupby(
        [scored["id_student"], scored["code_module"], scored["code_presentation"]]
    ).sum()
    contrib.index.names = KEY
    idx = pd.MultiIndex.from_frame(records[KEY])
    out = contrib.reindex(idx).fillna(0.0).clip(0.0, 100.0).to_numpy(dtype=float)
    return pd.Series(out, index=records.index, name="partial_grade")


def exam_scores(records: pd.DataFrame, defs: pd.DataFrame, subs: pd.DataFrame) -> pd.Series:
    """Exam score per registration; mean over exams when a course has several, NaN when absent."""
    scored = subs[["id_assessment", "id_student", "score"]].merge(
        defs.loc[defs["assessment_type"] == "Exam", ["id_assessment", "code_module", "code_presentation"]],
        on="id_assessment",
    )
    scored = scored[scored["score"].notna()]
    mean = scored.groupby(KEY)["score"].mean()
    idx = pd.MultiIndex.from_frame(records[KEY])
    return pd.Series(mean.reindex(idx).to_numpy(dtype=float), index=records.index, name="exam_score")


# --------------------------------------------------------------------------- pass model


@dataclass(frozen=True)
class PassModelWeights:
    code_module: str
    code_presentation: str
    alpha: float
    beta: float
    n_fit: int
    # implied threshold of the raw fit minus 40; reported, never applied
    threshold_offset: float = 0.0
    source: str = "fit"

    @property
    def exam_share(self) -> float:
        return self.beta / (self.alpha + self.beta)

    def grade(self, x, y):
        return self.alpha * np.asarray(x, dtype=float) + self.beta * np.asarray(y, dtype=float)

    def passes(self, x, y):
        return self.grade(x, y) >= PASS_THRESHOLD


class InsufficientDataError(ValueError):
    pass


def _logistic_newton(X: np.ndarray, y: np.ndarray, l2: float, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Penalised logistic regression by damped Newton steps.

    ``X`` carries a leading intercept column which is not penalised.  Returns
    the coefficient vector.  Fully deterministic.
    """
    n, p = X.shape
    w = np.zeros(p)
    pen = np.full(p, l2)
    pen[0] = 0.0

    def objective(w):
        z = X @ w
        return np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * np.sum(pen * w * w)

    f = objective(w)
    for _ in range(max_iter):
        z = X @ w
        mu = 0.5 * (1.0 + np.tanh(0.5 * z))
        grad = X.T @ (mu - y) / n + pen * w
        hess = (X * (mu * (1 - mu))[:, None]).T @ X / n + np.diag(pen) + 1e-12 * np.eye(p)
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            w_new = w - t * step
            f_new = objective(w_new)
            if f_new <= f - 1e-4 * t * grad @ step or t < 1e-10:
                break
            t *= 0.5
        converged = abs(f - f_new) < tol * max(1.0, abs(f)) and np.max(np.abs(t * step)) < 1e-8
        w, f = w_new, f_new
        if converged:
            break
    return w


def fit_pass_weights(
    x: Sequence[float],
    y: Sequence[float],
    labels: Sequence[int],
    code_module: str = "",
    code_presentation: str = "",
    l2: float = 1e-4,
) -> PassModelWeights:
    """Fit ``alpha * x + beta * y >= 40`` to binary pass labels.

    Raises :class:`InsufficientDataError` when fewer than two records of either
    label are available or the fitted direction has no positive component.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    labels = np.asarray(labels, dtype=float)
    ok = ~(np.isnan(x) | np.isnan(y))
    x, y, labels = x[ok], y[ok], labels[ok]
    if (labels == 1).sum() < 2 or (labels == 0).sum() < 2:
        raise InsufficientDataError(f"{code_module} {code_presentation}: need >= 2 records of each label")

    # grades on the 0-1 scale, centred; the intercept absorbs the shift
    u, v = x / 100.0, y / 100.0
    mu_u, mu_v = u.mean(), v.mean()
    X = np.column_stack([np.ones_like(u), u - mu_u, v - mu_v])
    w0, w1, w2 = _logistic_newton(X, labels, l2)
    w1, w2 = max(w1, 0.0), max(w2, 0.0)
    if w1 + w2 <= 0:
        raise InsufficientDataError(f"{code_module} {code_presentation}: no positive boundary direction")
    alpha, beta = w1 / (w1 + w2), w2 / (w1 + w2)
    # raw boundary: w1*(x/100 - mu_u) + w2*(y/100 - mu_v) + w0 = 0
    implied = 100.0 * (w1 * mu_u + w2 * mu_v - w0) / (w1 + w2)
    return PassModelWeights(code_module, code_presentation, float(alpha), float(beta), int(len(x)),
                            float(implied - PASS_THRESHOLD), "fit")


class PassWeightModel(BaseEstimator):
    """Per course-presentation pass-model weights with pooled fallback.

    ``fit`` takes a frame with ``code_module``, ``code_presentation``,
    ``assessment_grade`` (x), ``exam_score`` (y, NaN when absent) and ``label``.
    """

    def __init__(self, l2: float = 1e-4):
        self.l2 = l2

    def fit(self, table: pd.DataFrame, y=None):
        has_exam = table["exam_score"].notna()
        pooled = table[has_exam]
        try:
            self.global_ = fit_pass_weights(
                pooled["assessment_grade"], pooled["exam_score"], pooled["label"], "*", "*", self.l2
            )
        except InsufficientDataError:
            logger.warning("pooled pass-model fit impossible; global weights default to exam-only")
            self.global_ = PassModelWeights("*", "*", 0.0, 1.0, int(len(pooled)), 0.0, "default")

        self.weights_: dict[tuple[str, str], PassModelWeights] = {}
        self.warnings_: list[str] = []
        for (mod, pres), grp in table.groupby(["code_module", "code_presentation"], sort=True):
            with_exam = grp[grp["exam_score"].notna()]
            if with_exam.empty:
                msg = f"{mod} {pres}: no exam scores recorded, using (alpha, beta) = (1, 0)"
                logger.warning(msg)
                self.warnings_.append(msg)
                self.weights_[(mod, pres)] = PassModelWeights(mod, pres, 1.0, 0.0, 0, 0.0, "no_exam")
                continue
            try:
                w = fit_pass_weights(
                    with_exam["assessment_grade"], with_exam["exam_score"], with_exam["label"], mod, pres, self.l2
                )
            except InsufficientDataError as exc:
                self.warnings_.append(f"{exc}; using pooled weights")
                g = self.global_
                w = PassModelWeights(mod, pres, g.alpha, g.beta, int(len(with_exam)), g.threshold_offset, "global")
            self.weights_[(mod, pres)] = w
        return self

    def weights_for(self, code_module: str, code_presentation: str) -> PassModelWeights:
        return self.weights_.get((code_module, code_presentation), self.global_)

    def final_grade(self, table: pd.DataFrame) -> pd.Series:
        """alpha * x + beta * y per row; NaN exam scores propagate."""
        alpha = np.empty(len(table))
        beta = np.empty(len(table))
        for i, (mod, pres) in enumerate(zip(table["code_module"], table["code_presentation"])):
            w = self.weights_for(mod, pres)
            alpha[i], beta[i] = w.alpha, w.beta
        grade = alpha * table["assessment_grade"].to_numpy(float) + beta * table["exam_score"].to_numpy(float)
        return pd.Series(grade, index=table.index, name="final_grade")

    def mean_exam_share(self, fitted_only: bool = True) -> float:
        shares = [w.exam_share for w in self.weights_.values() if w.source == "fit" or not fitted_only]
        return float(np.mean(shares)) if shares else math.nan

    def to_frame(self) -> pd.DataFrame:
        rows = [asdict(w) for _, w in sorted(self.weights_.items())]
        return pd.DataFrame(rows, columns=[
            "code_module", "code_presentation", "alpha", "beta", "n_fit", "threshold_offset", "source"
        ])


def grade_inputs(records: pd.DataFrame, defs: pd.DataFrame, subs: pd.DataFrame) -> pd.DataFrame:
    """Frame of (module, presentation, x, y, label) used to fit the pass model."""
    out = records[KEY + ["label"]].copy()
    out["assessment_grade"] = partial_grades(records, defs, subs, None)
    out["exam_score"] = exam_scores(records, defs, subs)
    return out


# --------------------------------------------------------------------------- snapshots


def build_snapshots(
    records: pd.DataFrame,
    defs: pd.DataFrame,
    subs: pd.DataFrame,
    days: Iterable[int] = SNAPSHOT_DAYS,
) -> dict[int, pd.DataFrame]:
    """One copy of ``records`` per day with a ``partial_grade`` column appended.

    The copies differ only in that column.  Exam scores are never included.
    """
    snaps = {}
    base = records.drop(columns=["partial_grade"], errors="ignore")
    for day in days:
        snap = base.copy()
        snap["partial_grade"] = partial_grades(base, defs, subs, day).to_numpy()
        snaps[int(day)] = snap
    return snaps


def write_snapshots(snaps: Mapping[int, pd.DataFrame], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for day, snap in sorted(snaps.items()):
        path = out_dir / f"snapshot_d{day}.csv"
        snap.to_csv(path, index=False)
        paths.append(path)
    return paths


def read_snapshots(out_dir: str | Path, days: Iterable[int] = SNAPSHOT_DAYS) -> dict[int, pd.DataFrame]:
    from .ingest import read_canonical

    return {int(d): read_canonical(Path(out_dir) / f"snapshot_d{d}.csv") for d in days}


def write_weights(model: PassWeightModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.to_frame()[["code_module", "code_presentation", "alpha", "beta", "n_fit"]].to_csv(path, index=False)
    return path
