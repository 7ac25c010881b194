"""Missing-data handlers: listwise deletion and single imputation.

Every imputer works on predictor and sensitive columns only; the outcome
column is never read. Observed cells pass through untouched.
"""

from __future__ import annotations

import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .logistic import fit_logistic
from .table import OUTCOME, Table, TableError

LD, MODE, REG, KNN = "ld", "mode", "reg", "knn"
HANDLERS = (LD, MODE, REG, KNN)
DEFAULT_K = 5
RIDGE = 1e-8


class ImputationError(ValueError):
    pass


class EmptyTrainingSetError(ImputationError):
    """Listwise deletion removed every row."""


@dataclass(frozen=True)
class HandlerKind:
    name: str
    k: int = DEFAULT_K

    def __post_init__(self):
        if self.name not in HANDLERS:
            raise ImputationError(f"unknown handler {self.name!r}")
        if self.k < 1:
            raise ImputationError("k must be at least 1")


def _feature_columns(t: Table) -> list[str]:
    return [c.name for c in t.schema if c.role != OUTCOME]


def listwise_delete(t: Table) -> Table:
    rows = np.flatnonzero(t.row_observed(_feature_columns(t)))
    if rows.size == 0 and t.n_rows:
        raise EmptyTrainingSetError("listwise deletion removed every row")
    return t.take(rows)


def _mode_code(codes: np.ndarray, n_levels: int) -> int:
    # argmax returns the first maximum, i.e. the earliest declared level on ties
    return int(np.argmax(np.bincount(codes, minlength=n_levels)))


def mode_impute(t: Table) -> Table:
    """Most frequent level for categorical columns, mean of observed values for numeric ones."""
    data, mask = {}, {}
    for name in _feature_columns(t):
        m = t.mask[name]
        if m.all():
            continue
        if not m.any():
            raise ImputationError(f"column {name!r} has no observed values")
        spec = t.spec(name)
        col = np.array(t[name])
        if spec.is_categorical:
            col[~m] = _mode_code(col[m], len(spec.levels))
        else:
            col[~m] = col[m].mean()
        data[name], mask[name] = col, np.ones_like(m)
    return t.with_columns(data, mask) if data else t


# -- regression imputation ----------------------------------------------------


@dataclass
class ColumnModel:
    target: str
    kind: str  # "linear" | "logistic" | "ovr" | "constant"
    predictors: tuple[str, ...]
    keep: np.ndarray | None = None  # design columns with spread on the fit rows
    params: list = field(default_factory=list)
    constant: float | int | None = None


@dataclass
class FittedImputer:
    kind: HandlerKind
    models: dict[str, ColumnModel]
    stats: dict = field(default_factory=dict)

    def transform(self, t: Table) -> Table:
        return _apply_regression(self, t)


def _design(t: Table, predictors: Sequence[str], rows: np.ndarray) -> np.ndarray:
    blocks = [np.ones(len(rows))]
    for name in predictors:
        spec = t.spec(name)
        col = t[name][rows]
        if spec.is_categorical:
            for code in range(1, len(spec.levels)):
                blocks.append((col == code).astype(float))
        else:
            blocks.append(col.astype(float))
    return np.column_stack(blocks)


def _least_squares(X: np.ndarray, y: np.ndarray, target: str) -> np.ndarray:
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        warnings.warn(
            f"regression imputer for {target!r}: rank-deficient design ({rank}/{X.shape[1]}), "
            f"using ridge {RIDGE:g}",
            stacklevel=3,
        )
        A = X.T @ X
        A[np.diag_indices_from(A)] += RIDGE
        return np.linalg.solve(A, X.T @ y)
    return np.linalg.lstsq(X, y, rcond=None)[0]


def fit_regression_imputer(train: Table) -> FittedImputer:
    """One regression per incomplete column, on the always-observed non-outcome columns.

    Numeric targets get ordinary least squares, binary categoricals a logistic
    regression, multi-level categoricals one-vs-rest logistic regressions
    (imputed level = highest probability). Models are fitted on the complete
    cases; jointly missing columns are each predicted from the complete
    columns only, without chaining.
    """
    features = _feature_columns(train)
    complete_cols = [c for c in features if train.mask[c].all()]
    incomplete = [c for c in features if not train.mask[c].all()]
    if incomplete and not train.row_observed(features).any():
        raise ImputationError("no complete cases to fit the regression imputer")
    rows = np.flatnonzero(train.row_observed(features))
    preds = tuple(complete_cols)
    X_full = _design(train, preds, rows)
    # constant design columns carry nothing; dropping them keeps the system well posed
    keep = np.r_[0, 1 + np.flatnonzero(np.ptp(X_full[:, 1:], axis=0) > 0)] if rows.size else np.array([0])
    X = X_full[:, keep]
    models = {}
    for target in incomplete:
        spec = train.spec(target)
        y = train[target][rows]
        if spec.is_categorical:
            present = np.unique(y)
            if present.size == 1:
                models[target] = ColumnModel(target, "constant", preds, keep, constant=int(present[0]))
            elif len(spec.levels) == 2:
                fit = fit_logistic(X[:, 1:], (y == 1).astype(float), lam=RIDGE)
                models[target] = ColumnModel(target, "logistic", preds, keep, [fit])
            else:
                fits = [
                    (int(code), fit_logistic(X[:, 1:], (y == code).astype(float), lam=RIDGE))
                    for code in present
                ]
                models[target] = ColumnModel(target, "ovr", preds, keep, fits)
        else:
            if np.ptp(y) == 0:
                models[target] = ColumnModel(target, "constant", preds, keep, constant=float(y[0]))
            else:
                beta = _least_squares(X, y.astype(float), target)
                models[target] = ColumnModel(target, "linear", preds, keep, [beta])
    return FittedImputer(HandlerKind(REG), models, {"n_fit_rows": int(rows.size)})


def _apply_regression(imp: FittedImputer, t: Table) -> Table:
    data, mask = {}, {}
    for target, model in imp.models.items():
        m = t.mask[target]
        if m.all():
            continue
        rows = np.flatnonzero(~m)
        col = np.array(t[target])
        if model.kind == "constant":
            col[rows] = model.constant
        else:
            X = _design(t, model.predictors, rows)[:, model.keep]
            if model.kind == "linear":
                col[rows] = X @ model.params[0]
            elif model.kind == "logistic":
                p = model.params[0].predict_proba(X[:, 1:])
                col[rows] = (p >= 0.5).astype(np.int64)
            else:
                codes = np.array([code for code, _ in model.params])
                probs = np.column_stack([f.predict_proba(X[:, 1:]) for _, f in model.params])
                col[rows] = codes[np.argmax(probs, axis=1)]
        data[target], mask[target] = col, np.ones_like(m)
    return t.with_columns(data, mask) if data else t


def regression_impute(train: Table) -> Table:
    return fit_regression_imputer(train).transform(train)


# -- k-nearest-neighbour imputation -------------------------------------------


def gower_distances(t: Table, recipients: np.ndarray, donors: np.ndarray, columns: Sequence[str]) -> np.ndarray:
    """Mixed-type Gower distance between recipient and donor rows over ``columns``.

    Numeric columns contribute ``|a - b| / range`` (range over the observed
    values in ``t``), categorical columns a 0/1 mismatch; contributions are
    averaged over the columns.
    """
    d = np.zeros((len(recipients), len(donors)))
    if not columns:
        return d
    for name in columns:
        spec = t.spec(name)
        col = t[name]
        a, b = col[recipients], col[donors]
        if spec.is_categorical:
            d += a[:, None] != b[None, :]
        else:
            obs = col[t.mask[name]]
            rng = float(obs.max() - obs.min()) if obs.size else 0.0
            if rng > 0:
                d += np.abs(a[:, None] - b[None, :]) / rng
    return d / len(columns)


def knn_impute(train: Table, k: int = DEFAULT_K, block: int = 512) -> Table:
    """Fill each incomplete row from its ``k`` nearest complete-case donors.

    Distances use the predictor and sensitive columns the recipient has
    observed. Numeric cells get the donors' mean, categorical cells their most
    frequent level (earliest declared level on ties). Distance ties go to the
    lower row index.
    """
    if k < 1:
        raise ImputationError("k must be at least 1")
    features = _feature_columns(train)
    observed = train.mask_matrix(features)
    donor_rows = np.flatnonzero(observed.all(axis=1))
    recipients = np.flatnonzero(~observed.all(axis=1))
    if recipients.size == 0:
        return train
    if donor_rows.size < k:
        raise ImputationError(f"need at least k={k} complete donor rows, have {donor_rows.size}")
    data = {c: np.array(train[c]) for c in features if not train.mask[c].all()}
    # recipients sharing a missingness pattern share the distance columns
    patterns = {}
    for r in recipients:
        patterns.setdefault(tuple(observed[r]), []).append(r)
    for key, rows in patterns.items():
        use = [c for c, ok in zip(features, key) if ok]
        fill = [c for c, ok in zip(features, key) if not ok]
        rows = np.array(rows)
        for start in range(0, len(rows), block):
            chunk = rows[start : start + block]
            dist = gower_distances(train, chunk, donor_rows, use)
            # stable sort keeps donor order (ascending row index) among equal distances
            nearest = donor_rows[np.argsort(dist, axis=1, kind="stable")[:, :k]]
            for c in fill:
                spec = train.spec(c)
                vals = train[c][nearest]
                if spec.is_categorical:
                    n_lv = len(spec.levels)
                    counts = np.zeros((len(chunk), n_lv), dtype=np.int64)
                    for j in range(k):
                        counts[np.arange(len(chunk)), vals[:, j]] += 1
                    data[c][chunk] = np.argmax(counts, axis=1)
                else:
                    data[c][chunk] = vals.mean(axis=1)
    mask = {c: np.ones(train.n_rows, dtype=bool) for c in data}
    return train.with_columns(data, mask)


def handle_missing(t: Table, kind: HandlerKind | str, k: int = DEFAULT_K) -> Table:
    """Dispatch to the handler named by ``kind``."""
    if isinstance(kind, str):
        kind = HandlerKind(kind, k)
    if kind.name == LD:
        return listwise_delete(t)
    if kind.name == MODE:
        return mode_impute(t)
    if kind.name == REG:
        return regression_impute(t)
    if kind.name == KNN:
        return knn_impute(t, kind.k)
    raise TableError(f"unknown handler {kind.name!r}")
