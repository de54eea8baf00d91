"""The nine classical baselines behind one estimator."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.discriminant_analysis import LinearDiscriminantAnalysis, QuadraticDiscriminantAnalysis
from sklearn.ensemble import BaggingClassifier, RandomForestClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVC
from sklearn.tree import DecisionTreeClassifier
from sklearn.utils.validation import check_array, check_is_fitted

logger = logging.getLogger(__name__)

BASELINES = ("LogisticRegression", "LDA", "RandomForest", "KNN", "GaussianNB", "QDA", "Bagging", "SVC", "DecisionTree")

# Families that see standardised inputs (scaler fitted on the training fold).
SCALED = {"KNN", "SVC"}

DEFAULTS: dict[str, dict[str, Any]] = {
    "LogisticRegression": {"C": 1.0, "max_iter": 1000},
    "LDA": {},
    "RandomForest": {"n_estimators": 100, "max_depth": None},
    "KNN": {"n_neighbors": 5},
    "GaussianNB": {},
    "QDA": {},
    "Bagging": {"n_estimators": 10},
    "SVC": {"C": 1.0, "gamma": "scale"},
    "DecisionTree": {"max_depth": None, "criterion": "gini"},
}

SEEDED = {"LogisticRegression", "RandomForest", "Bagging", "SVC", "DecisionTree"}

# Ridge added to singular class covariances in LDA/QDA.
COVARIANCE_RIDGE = 1e-3


@dataclass(frozen=True)
class ClassifierSpec:
    name: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in BASELINES:
            raise ValueError(f"unknown baseline {self.name!r}; expected one of {BASELINES}")
        est = _family(self.name, {}, None)
        valid = set(est.get_params())
        bad = set(self.hyperparameters) - valid
        if bad:
            raise ValueError(f"{self.name}: unknown hyperparameters {sorted(bad)}")


def _family(name: str, params: Mapping[str, Any], seed: int | None):
    kw = {**DEFAULTS[name], **params}
    if name in SEEDED:
        kw.setdefault("random_state", seed)
    if name == "LogisticRegression":
        return LogisticRegression(**kw)
    if name == "LDA":
        return LinearDiscriminantAnalysis(**kw)
    if name == "RandomForest":
        return RandomForestClassifier(**kw)
    if name == "KNN":
        return KNeighborsClassifier(**kw)
    if name == "GaussianNB":
        return GaussianNB(**kw)
    if name == "QDA":
        return QuadraticDiscriminantAnalysis(**kw)
    if name == "Bagging":
        return BaggingClassifier(**kw)
    if name == "SVC":
        return SVC(**kw)
    return DecisionTreeClassifier(**kw)


def _singular(cov: np.ndarray) -> bool:
    if cov.size == 0:
        return True
    return np.linalg.matrix_rank(cov, tol=1e-10 * max(1.0, np.abs(cov).max())) < cov.shape[0]


class BaselineClassifier(ClassifierMixin, BaseEstimator):
    """One of the nine baseline families with deterministic seeding.

    ``name`` picks the family and ``params`` overrides its defaults.  KNN and
    SVC standardise their inputs with training statistics.  A training set
    with a single label yields a constant predictor.  LDA and QDA receive a
    covariance ridge of ``COVARIANCE_RIDGE`` when a class covariance is
    singular.
    """

    def __init__(self, name: str = "LogisticRegression", params: Mapping[str, Any] | None = None,
                 random_state: int | None = 0):
        self.name = name
        self.params = params
        self.random_state = random_state

    def _build(self, X, y):
        params = dict(self.params or {})
        if self.name in ("LDA", "QDA"):
            covs = [np.atleast_2d(np.cov(X[y == c], rowvar=False)) for c in np.unique(y)]
            if self.name == "LDA" and _singular(np.cov(X, rowvar=False).reshape(X.shape[1], -1)):
                logger.info("LDA: singular covariance, shrinkage %.0e", COVARIANCE_RIDGE)
                params.setdefault("solver", "lsqr")
                params.setdefault("shrinkage", COVARIANCE_RIDGE)
            elif self.name == "QDA" and any(_singular(c) for c in covs):
                logger.info("QDA: singular class covariance, reg_param %.0e", COVARIANCE_RIDGE)
                params.setdefault("reg_param", COVARIANCE_RIDGE)
        est = _family(self.name, params, self.random_state)
        if self.name in SCALED:
            est = make_pipeline(StandardScaler(), est)
        return est

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y).astype(int)
        if len(X) == 0:
            raise ValueError("empty training matrix")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        t0 = time.perf_counter()
        present = np.unique(y)
        if len(present) == 1:
            self.constant_ = int(present[0])
            self.estimator_ = None
        else:
            self.constant_ = None
            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", message="Variables are collinear")
                self.estimator_ = self._build(X, y).fit(X, y)
        self.fit_seconds_ = time.perf_counter() - t0
        return self

    def _check(self, X):
        check_is_fitted(self, "n_features_in_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got shape {X.shape}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        if len(X) == 0:
            return np.zeros(0, dtype=int)
        if self.constant_ is not None:
            return np.full(len(X), self.constant_, dtype=int)
        return self.estimator_.predict(X).astype(int)

    def predict_proba(self, X) -> np.ndarray:
        X = self._check(X)
        if len(X) == 0:
            return np.zeros((0, 2))
        if self.constant_ is not None:
            out = np.zeros((len(X), 2))
            out[:, self.constant_] = 1.0
            return out
        est = self.estimator_
        if hasattr(est, "predict_proba") and self.name != "SVC":
            return est.predict_proba(X)
        # SVC: logistic squashing of the decision function; labels use its sign
        p = 1.0 / (1.0 + np.exp(-est.decision_function(X)))
        return np.column_stack([1 - p, p])


@dataclass
class FittedClassifier:
    spec: ClassifierSpec
    model: BaselineClassifier
    seed: int

    @property
    def fit_seconds(self) -> float:
        return self.model.fit_seconds_


def fit(spec: ClassifierSpec, train_matrix, train_labels, seed: int = 0) -> FittedClassifier:
    model = BaselineClassifier(spec.name, dict(spec.hyperparameters), seed).fit(train_matrix, train_labels)
    return FittedClassifier(spec, model, seed)


def predict(fitted: FittedClassifier, matrix) -> tuple[np.ndarray, np.ndarray]:
    """(labels, positive-class scores)."""
    return fitted.model.predict(matrix), fitted.model.predict_proba(matrix)[:, 1]


def all_baselines(seed: int = 0) -> dict[str, BaselineClassifier]:
    return {name: BaselineClassifier(name, None, seed) for name in BASELINES}

