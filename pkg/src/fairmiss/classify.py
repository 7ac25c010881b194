"""The four classifiers and their cross-validated tuning.

Logistic regression is fitted by the damped IRLS in :mod:`fairmiss.logistic`.
Random forests, gradient boosting and the RBF support vector machine are
backed by scikit-learn (bagged Gini CART with a random feature subset per
split, histogram-binned logistic-loss gradient boosting, libsvm's SMO solver). Every model sees
only predictor columns: sensitive and outcome columns are dropped when the
design matrix is built.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import HistGradientBoostingClassifier, RandomForestClassifier
from sklearn.svm import SVC

from .logistic import LogisticFit, fit_logistic
from .table import OUTCOME, SENSITIVE, Table, one_hot_encode

log = logging.getLogger(__name__)

LR, RF, BOOST, SVM = "lr", "rf", "boost", "svm"
MODEL_KINDS = (LR, RF, BOOST, SVM)
SVM_TOL = 1e-3

DEFAULT_GRID: dict[str, list[dict]] = {
    LR: [{"lam": 0.0}, {"lam": 0.01}, {"lam": 0.1}, {"lam": 1.0}],
    RF: [
        {"n_trees": 200, "max_depth": None, "mtry": "sqrt"},
        {"n_trees": 200, "max_depth": 8, "mtry": "sqrt"},
    ],
    BOOST: [
        {"n_trees": n, "learning_rate": 0.1, "max_depth": d} for d in (2, 3) for n in (100, 300)
    ],
    SVM: [{"C": C, "gamma_scale": g} for C in (0.1, 1.0, 10.0) for g in (1.0, 2.0)],
}


class ClassifierError(ValueError):
    pass


def outcome_vector(t: Table, positive: str | None = None) -> np.ndarray:
    """0/1 labels; ``positive`` defaults to the last declared outcome level."""
    name = t.outcome
    spec = t.spec(name)
    col = t[name]
    if spec.is_categorical:
        code = len(spec.levels) - 1 if positive is None else spec.code_of(positive)
        return (col == code).astype(np.int64)
    return (col == (1.0 if positive is None else float(positive))).astype(np.int64)


@dataclass(frozen=True)
class Preprocessor:
    feature_names: tuple[str, ...]
    keep: np.ndarray
    center: np.ndarray
    scale: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X[:, self.keep] - self.center) / self.scale


def design(t: Table) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Encoded predictors (no sensitive or outcome columns), numeric-flag per feature, names."""
    dm = one_hot_encode(t, drop_roles={SENSITIVE, OUTCOME})
    return dm.X, dm.numeric_features, dm.feature_names


def _preprocessor(X: np.ndarray, numeric: np.ndarray, names, standardize: bool) -> Preprocessor:
    keep = np.flatnonzero(np.ptp(X, axis=0) > 0) if len(X) else np.arange(X.shape[1])
    Xk = X[:, keep]
    center = np.zeros(len(keep))
    scale = np.ones(len(keep))
    if standardize:
        num = numeric[keep]
        center[num] = Xk[:, num].mean(axis=0)
        sd = Xk[:, num].std(axis=0)
        scale[num] = np.where(sd > 0, sd, 1.0)
    return Preprocessor(tuple(names[i] for i in keep), keep, center, scale)


@dataclass
class TrainedModel:
    kind: str
    hyper: dict
    prep: Preprocessor
    estimator: object
    threshold: float = 0.5
    converged: bool = True
    flags: list[str] = field(default_factory=list)

    def predict_from_design(self, X: np.ndarray) -> np.ndarray:
        if X.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        Z = self.prep.transform(X)
        if self.kind == LR:
            return (self.estimator.predict_proba(Z) >= self.threshold).astype(np.int64)
        if self.kind == RF:
            return _majority_vote(self.estimator, Z)
        if self.kind == BOOST:
            p = self.estimator.predict_proba(Z)[:, 1]
            return (p >= self.threshold).astype(np.int64)
        if self.kind == SVM:
            return (self.estimator.decision_function(Z) >= 0).astype(np.int64)
        raise ClassifierError(f"unknown model kind {self.kind!r}")


def _majority_vote(forest: RandomForestClassifier, Z: np.ndarray) -> np.ndarray:
    votes = np.zeros(len(Z))
    for tree in forest.estimators_:
        votes += forest.classes_[tree.predict(Z).astype(np.int64)]
    # ties go to the positive class
    return (2 * votes >= len(forest.estimators_)).astype(np.int64)


def _check_labels(y: np.ndarray) -> None:
    if len(y) == 0 or y.min() == y.max():
        raise ClassifierError("training labels must contain both classes")


def _seed(rng: np.random.Generator | int | None) -> int:
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**31 - 1))
    return 0 if rng is None else int(rng)


def _fit_arrays(
    kind: str, hyper: Mapping, X: np.ndarray, y: np.ndarray, numeric: np.ndarray, names, seed: int
) -> TrainedModel:
    _check_labels(y)
    prep = _preprocessor(X, numeric, names, standardize=kind in (LR, SVM))
    Z = prep.transform(X)
    flags = []
    if kind == LR:
        est: object = fit_logistic(Z, y, lam=float(hyper.get("lam", 0.0)))
        converged = est.converged
        if not converged:
            flags.append("irls_max_iter")
    elif kind == RF:
        est = RandomForestClassifier(
            n_estimators=int(hyper.get("n_trees", 200)),
            max_depth=hyper.get("max_depth"),
            max_features=hyper.get("mtry", "sqrt"),
            criterion="gini",
            bootstrap=True,
            random_state=seed,
            n_jobs=1,
        ).fit(Z, y)
        converged = True
    elif kind == BOOST:
        est = HistGradientBoostingClassifier(
            loss="log_loss",
            max_iter=int(hyper.get("n_trees", 100)),
            learning_rate=float(hyper.get("learning_rate", 0.1)),
            max_depth=int(hyper.get("max_depth", 3)),
            max_leaf_nodes=None,
            min_samples_leaf=int(hyper.get("min_leaf", 5)),
            l2_regularization=0.0,
            early_stopping=False,
            random_state=seed,
        ).fit(Z, y)
        converged = True
    elif kind == SVM:
        p = max(1, Z.shape[1])
        gamma = float(hyper.get("gamma", hyper.get("gamma_scale", 1.0) / p))
        est = SVC(C=float(hyper.get("C", 1.0)), kernel="rbf", gamma=gamma, tol=SVM_TOL / 10)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est.fit(Z, y)
        converged = not any("max_iter" in str(w.message) for w in caught)
        if not converged:
            flags.append("smo_max_iter")
    else:
        raise ClassifierError(f"unknown model kind {kind!r}")
    return TrainedModel(kind, dict(hyper), prep, est, converged=converged, flags=flags)


def fit(
    kind: str,
    hyper: Mapping,
    train: Table,
    rng: np.random.Generator | int | None = None,
    positive: str | None = None,
) -> TrainedModel:
    if not train.is_complete:
        raise ClassifierError("training table has missing cells")
    X, numeric, names = design(train)
    y = outcome_vector(train, positive)
    return _fit_arrays(kind, hyper, X, y, numeric, names, _seed(rng))


def predict(model: TrainedModel, rows: Table) -> np.ndarray:
    X, _, names = design(rows)
    if rows.n_rows and max(model.prep.keep, default=-1) >= X.shape[1]:
        raise ClassifierError("rows do not match the training schema")
    return model.predict_from_design(X)


# -- cross-validation ---------------------------------------------------------


def fold_assignment(y: np.ndarray, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Seeded random partition into ``folds`` held-out index sets.

    A held-out fold lacking one of the classes is merged into the next fold
    (with a warning) so every fold is scored on both classes.
    """
    if folds < 2:
        raise ClassifierError("need at least two folds")
    n = len(y)
    if n < folds:
        raise ClassifierError(f"{n} rows cannot fill {folds} folds")
    perm = rng.permutation(n)
    parts = [np.sort(p) for p in np.array_split(perm, folds)]
    merged: list[np.ndarray] = []
    pending = np.array([], dtype=np.int64)
    for p in parts:
        cur = np.concatenate([pending, p])
        if np.unique(y[cur]).size < 2:
            pending = cur
            continue
        merged.append(np.sort(cur))
        pending = np.array([], dtype=np.int64)
    if pending.size:
        if not merged:
            raise ClassifierError("no fold contains both classes")
        merged[-1] = np.sort(np.concatenate([merged[-1], pending]))
    if len(merged) < len(parts):
        warnings.warn(f"merged folds lacking a class: {len(parts)} -> {len(merged)}", stacklevel=2)
    return merged


@dataclass
class CVResult:
    best: dict
    scores: list[float]
    grid: list[dict]


def cross_validate(
    kind: str,
    train: Table,
    grid: Sequence[Mapping] | None,
    folds: int,
    rng: np.random.Generator,
    positive: str | None = None,
) -> CVResult:
    """Grid point with the best mean held-out accuracy; ties go to the earlier point."""
    grid = [dict(g) for g in (grid if grid is not None else DEFAULT_GRID[kind])]
    if not grid:
        raise ClassifierError("empty hyperparameter grid")
    if not train.is_complete:
        raise ClassifierError("training table has missing cells")
    X, numeric, names = design(train)
    y = outcome_vector(train, positive)
    _check_labels(y)
    fold_sets = fold_assignment(y, folds, rng)
    seed = _seed(rng)
    if len(grid) == 1:
        return CVResult(grid[0], [math.nan], grid)
    acc = np.zeros((len(fold_sets), len(grid)))
    for f, held in enumerate(fold_sets):
        trn = np.setdiff1d(np.arange(len(y)), held, assume_unique=True)
        Xtr, ytr, Xte, yte = X[trn], y[trn], X[held], y[held]
        if ytr.min() == ytr.max():
            raise ClassifierError("a training fold lacks one class")
        if kind == BOOST:
            acc[f] = _boost_fold_scores(grid, Xtr, ytr, Xte, yte, numeric, names, seed)
            continue
        for g, hyper in enumerate(grid):
            model = _fit_arrays(kind, hyper, Xtr, ytr, numeric, names, seed)
            acc[f, g] = np.mean(model.predict_from_design(Xte) == yte)
    means = acc.mean(axis=0)
    best = int(np.flatnonzero(means == means.max())[0])
    return CVResult(grid[best], means.tolist(), grid)


def _boost_fold_scores(grid, Xtr, ytr, Xte, yte, numeric, names, seed) -> np.ndarray:
    # Without early stopping or subsampling an n-tree booster equals the first n
    # stages of a longer one: fit the longest per (rate, depth) and read the
    # shorter ones off the staged predictions.
    out = np.zeros(len(grid))
    groups: dict[tuple, list[int]] = {}
    for g, hyper in enumerate(grid):
        key = (float(hyper.get("learning_rate", 0.1)), int(hyper.get("max_depth", 3)))
        groups.setdefault(key, []).append(g)
    for (rate, depth), members in groups.items():
        n_max = max(int(grid[g].get("n_trees", 100)) for g in members)
        model = _fit_arrays(
            BOOST, {"n_trees": n_max, "learning_rate": rate, "max_depth": depth},
            Xtr, ytr, numeric, names, seed,
        )
        wanted = {int(grid[g].get("n_trees", 100)) for g in members}
        Z = model.prep.transform(Xte)
        staged = {}
        for stage, proba in enumerate(model.estimator.staged_predict_proba(Z), start=1):
            if stage in wanted:
                staged[stage] = np.mean((proba[:, 1] >= 0.5).astype(np.int64) == yte)
        for g in members:
            out[g] = staged[int(grid[g].get("n_trees", 100))]
    return out


def tune_and_fit(
    kind: str,
    train: Table,
    grid: Sequence[Mapping] | None,
    folds: int,
    rng: np.random.Generator,
    positive: str | None = None,
) -> TrainedModel:
    cv = cross_validate(kind, train, grid, folds, rng, positive)
    return fit(kind, cv.best, train, rng, positive)


# -- diagnostics --------------------------------------------------------------


def rf_variable_importance(model: TrainedModel, by_column: bool = False) -> dict[str, float]:
    """Mean decrease in Gini impurity, normalized to sum to 1.

    With ``by_column`` the indicator features of each categorical column are
    summed back into their source column.
    """
    if model.kind != RF:
        raise ClassifierError("variable importance is only defined for random forests")
    imp = np.asarray(model.estimator.feature_importances_, dtype=float)
    total = imp.sum()
    imp = imp / total if total > 0 else np.full_like(imp, 1.0 / max(1, imp.size))
    scores = dict(zip(model.prep.feature_names, imp.tolist()))
    if not by_column:
        return scores
    out: dict[str, float] = {}
    for name, v in scores.items():
        col = name.split("=", 1)[0]
        out[col] = out.get(col, 0.0) + v
    return out


def svm_kkt_residuals(model: TrainedModel, train: Table, positive: str | None = None) -> np.ndarray:
    """Per-point violation of the soft-margin KKT conditions on the training set.

    With margins ``m_i = y_i f(x_i)`` (labels in {-1, +1}): free support
    vectors need ``m_i = 1``, bound ones ``m_i <= 1`` and non-support points
    ``m_i >= 1``. The returned value is how far each point misses its
    condition (0 when satisfied).
    """
    if model.kind != SVM:
        raise ClassifierError("KKT residuals need an SVM model")
    X, _, _ = design(train)
    y = 2 * outcome_vector(train, positive) - 1
    Z = model.prep.transform(X)
    est = model.estimator
    margin = y * est.decision_function(Z)
    C = float(model.hyper.get("C", 1.0))
    alpha = np.zeros(len(y))
    alpha[est.support_] = np.abs(est.dual_coef_[0])
    res = np.zeros(len(y))
    free = (alpha > 1e-12) & (alpha < C - 1e-12 * C)
    bound = alpha >= C - 1e-12 * C
    zero = alpha <= 1e-12
    res[free] = np.abs(margin[free] - 1)
    res[bound] = np.maximum(0.0, margin[bound] - 1)
    res[zero] = np.maximum(0.0, 1 - margin[zero])
    return res


def boost_staged_train_loss(model: TrainedModel, train: Table, positive: str | None = None) -> np.ndarray:
    """Mean logistic loss on the training set after each boosting stage."""
    if model.kind != BOOST:
        raise ClassifierError("staged loss needs a boosting model")
    X, _, _ = design(train)
    y = outcome_vector(train, positive)
    Z = model.prep.transform(X)
    losses = []
    for raw in model.estimator.staged_decision_function(Z):
        z = np.ravel(raw)
        losses.append(float(np.mean(np.logaddexp(0.0, z) - y * z)))
    return np.array(losses)


def lr_parameters(model: TrainedModel) -> LogisticFit:
    if model.kind != LR:
        raise ClassifierError("not a logistic regression model")
    return model.estimator


__all__ = [
    "BOOST",
    "DEFAULT_GRID",
    "LR",
    "MODEL_KINDS",
    "RF",
    "SVM",
    "CVResult",
    "ClassifierError",
    "TrainedModel",
    "boost_staged_train_loss",
    "cross_validate",
    "fit",
    "fold_assignment",
    "outcome_vector",
    "predict",
    "rf_variable_importance",
    "svm_kkt_residuals",
    "tune_and_fit",
]
