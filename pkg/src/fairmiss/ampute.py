"""Multivariate amputation: inject MCAR, MAR or MNAR missingness into a complete table.

The procedure follows the usual multivariate amputation recipe:

1. every row is assigned to one candidate missingness pattern, with
   probability equal to the pattern frequency;
2. within a pattern, each candidate gets a weighted sum score built from
   standardized column values (all weights zero for MCAR);
3. the score is turned into a missingness probability through a logistic
   curve whose horizontal shift is solved so that the mean probability equals
   the target proportion; MCAR simply uses the proportion itself;
4. a Bernoulli draw per candidate decides whether the row is amputed, in
   which case the pattern's columns are masked.

The target proportion is the share of rows that receive missing values.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .table import OUTCOME, PREDICTOR, SENSITIVE, Table

log = logging.getLogger(__name__)

MCAR, MAR, MNAR = "MCAR", "MAR", "MNAR"
MECHANISMS = (MCAR, MAR, MNAR)
RIGHT, LEFT = "right", "left"


class AmputationError(ValueError):
    pass


@dataclass(frozen=True)
class MissingnessPattern:
    missing_columns: tuple[str, ...]
    frequency: float = 1.0
    weights: Mapping[str, float] = field(default_factory=dict)
    direction: str = RIGHT

    def __post_init__(self):
        object.__setattr__(self, "missing_columns", tuple(self.missing_columns))
        object.__setattr__(self, "weights", dict(self.weights))
        if not self.missing_columns:
            raise AmputationError("pattern must make at least one column missing")
        if not 0.0 < self.frequency <= 1.0:
            raise AmputationError("pattern frequency must lie in (0, 1]")
        if self.direction not in (RIGHT, LEFT):
            raise AmputationError(f"unknown direction {self.direction!r}")

    @property
    def is_unweighted(self) -> bool:
        return all(w == 0 for w in self.weights.values())

    def to_dict(self) -> dict:
        return {
            "missing_columns": list(self.missing_columns),
            "frequency": self.frequency,
            "weights": dict(self.weights),
            "direction": self.direction,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> MissingnessPattern:
        return cls(
            tuple(d["missing_columns"]),
            float(d.get("frequency", 1.0)),
            dict(d.get("weights", {})),
            d.get("direction", RIGHT),
        )


@dataclass(frozen=True)
class AmputeConfig:
    mechanism: str
    patterns: tuple[MissingnessPattern, ...]
    proportion: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "patterns", tuple(self.patterns))
        if self.mechanism not in MECHANISMS:
            raise AmputationError(f"unknown mechanism {self.mechanism!r}")
        if not 0.0 < self.proportion < 1.0:
            raise AmputationError("proportion must lie in (0, 1)")
        if not self.patterns:
            raise AmputationError("at least one pattern is required")
        total = sum(p.frequency for p in self.patterns)
        if abs(total - 1.0) > 1e-9:
            raise AmputationError(f"pattern frequencies sum to {total}, not 1")
        for p in self.patterns:
            if self.mechanism == MCAR and not p.is_unweighted:
                raise AmputationError("MCAR patterns cannot carry weights")
            if self.mechanism != MCAR and p.is_unweighted:
                raise AmputationError(f"{self.mechanism} patterns need nonzero weights")
            if self.mechanism == MAR and any(
                w != 0 and c in p.missing_columns for c, w in p.weights.items()
            ):
                raise AmputationError("MAR weights must sit on observed columns only")
            if self.mechanism == MNAR and not any(
                p.weights.get(c, 0) != 0 for c in p.missing_columns
            ):
                raise AmputationError("MNAR weights must include an amputed column")

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "proportion": self.proportion,
            "patterns": [p.to_dict() for p in self.patterns],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> AmputeConfig:
        return cls(
            d["mechanism"],
            tuple(MissingnessPattern.from_dict(p) for p in d["patterns"]),
            float(d.get("proportion", 0.5)),
        )


def default_config(
    mechanism: str,
    amputed_variables: Sequence[str],
    sensitive: str,
    proportion: float = 0.5,
) -> AmputeConfig:
    """One equally frequent pattern per amputed variable.

    MAR scores rise with ``1 - S`` (unprivileged rows), which is a weight of
    -1 on the standardized sensitive column. MNAR scores rise as the variable
    itself falls (weight -1 on its standardized value or ordinal rank), so low
    values / low-ranked levels go missing more often.
    """
    freq = 1.0 / len(amputed_variables)
    patterns = []
    for var in amputed_variables:
        if mechanism == MCAR:
            weights = {}
        elif mechanism == MAR:
            weights = {sensitive: -1.0}
        elif mechanism == MNAR:
            weights = {var: -1.0}
        else:
            raise AmputationError(f"unknown mechanism {mechanism!r}")
        patterns.append(MissingnessPattern((var,), freq, weights, RIGHT))
    return AmputeConfig(mechanism, tuple(patterns), proportion)


@dataclass(frozen=True)
class AmputedTable:
    table: Table
    realized_proportion: float
    per_pattern_counts: dict[int, dict[str, int]]
    amputed_rows: np.ndarray

    @property
    def realized_cell_proportion(self) -> float:
        cells = sum(self.table.missing_count().values())
        preds = len(self.table.columns_with_role(PREDICTOR))
        return cells / max(1, self.table.n_rows * preds)


def assign_patterns(n: int, patterns: Sequence[MissingnessPattern], rng: np.random.Generator) -> np.ndarray:
    """Pattern index per row, drawn independently with the pattern frequencies."""
    if not patterns:
        raise AmputationError("empty pattern list")
    freqs = np.array([p.frequency for p in patterns], dtype=float)
    if len(patterns) == 1:
        return np.zeros(n, dtype=np.int64)
    cdf = np.cumsum(freqs / freqs.sum())
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64)


def _score_column(t: Table, name: str) -> np.ndarray:
    spec = t.spec(name)
    col = t[name]
    if spec.is_categorical:
        if spec.ordinal_encoding is None:
            raise AmputationError(f"categorical column {name!r} needs an ordinal_encoding to be scored")
        ranks = np.array([float(spec.ordinal_encoding[lv]) for lv in spec.levels])
        return ranks[col]
    return col.astype(float)


def weighted_sum_scores(
    t: Table, weights: Mapping[str, float], rows: np.ndarray | None = None
) -> np.ndarray:
    """``sum_j w_j * z_ij`` over ``rows`` with columns standardized on those rows.

    Standardization uses the population (divide-by-n) standard deviation. A
    weighted column with zero spread contributes nothing and triggers a warning.
    """
    rows = np.arange(t.n_rows) if rows is None else np.asarray(rows)
    scores = np.zeros(len(rows))
    for name, w in weights.items():
        if w == 0:
            continue
        if not t.mask[name][rows].all():
            raise AmputationError(f"weighted column {name!r} has masked cells")
        x = _score_column(t, name)[rows]
        if len(x) == 0:
            continue
        sd = x.std()
        if sd == 0 or not np.isfinite(sd):
            warnings.warn(f"column {name!r} has zero variance; it adds nothing to the score", stacklevel=2)
            continue
        scores += w * (x - x.mean()) / sd
    return scores


def _logistic(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def solve_probability_shift(
    scores: np.ndarray, target_prop: float, tol: float = 1e-6, max_steps: int = 200
) -> float:
    """Shift ``b`` with ``mean(logistic(scores + b)) == target_prop``, by bisection on [-50, 50]."""
    if not 0.0 < target_prop < 1.0:
        raise AmputationError("target proportion must lie in (0, 1)")
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        return math.log(target_prop / (1 - target_prop))
    lo, hi = -50.0, 50.0
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        gap = _logistic(scores + mid).mean() - target_prop
        if abs(gap) <= tol:
            return mid
        if gap > 0:
            hi = mid
        else:
            lo = mid
    raise AmputationError(f"shift bisection did not converge in {max_steps} steps")


def missingness_probabilities(
    t: Table, pattern: MissingnessPattern, rows: np.ndarray, proportion: float, mechanism: str
) -> np.ndarray:
    if mechanism == MCAR or pattern.is_unweighted:
        return np.full(len(rows), proportion)
    scores = weighted_sum_scores(t, pattern.weights, rows)
    if pattern.direction == LEFT:
        scores = -scores
    b = solve_probability_shift(scores, proportion)
    return _logistic(scores + b)


def ampute(t: Table, config: AmputeConfig, rng: np.random.Generator) -> AmputedTable:
    """Return a copy of ``t`` with missingness injected according to ``config``."""
    if not t.is_complete:
        raise AmputationError("amputation expects a fully observed table")
    names = set(t.names)
    for p in config.patterns:
        for c in list(p.missing_columns) + list(p.weights):
            if c not in names:
                raise AmputationError(f"pattern references unknown column {c!r}")
        for c in p.missing_columns:
            if t.spec(c).role in (SENSITIVE, OUTCOME):
                raise AmputationError(f"cannot ampute {t.spec(c).role} column {c!r}")

    n = t.n_rows
    assignment = assign_patterns(n, config.patterns, rng)
    draws = rng.random(n)
    amputed = np.zeros(n, dtype=bool)
    mask = {c: t.mask[c].copy() for c in t.names}
    counts = {}
    for k, pattern in enumerate(config.patterns):
        rows = np.flatnonzero(assignment == k)
        if rows.size == 0:
            counts[k] = {"candidates": 0, "amputed": 0}
            continue
        prob = missingness_probabilities(t, pattern, rows, config.proportion, config.mechanism)
        hit = rows[draws[rows] < prob]
        amputed[hit] = True
        for c in pattern.missing_columns:
            mask[c][hit] = False
        counts[k] = {"candidates": int(rows.size), "amputed": int(hit.size)}
    out = t.with_mask(mask)
    realized = float(amputed.mean()) if n else 0.0
    log.debug("amputed %d/%d rows (%s)", int(amputed.sum()), n, config.mechanism)
    return AmputedTable(out, realized, counts, np.flatnonzero(amputed))


def ampute_table(t: Table, config: AmputeConfig, seed: int | np.random.Generator) -> Table:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ampute(t, config, rng).table

