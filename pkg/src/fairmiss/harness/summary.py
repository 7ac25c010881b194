"""Per-group descriptive statistics of a results store."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass

import numpy as np

from ..fairness import FAIRNESS_METRICS
from .store import FairnessRecord, ResultsStore

FACTORS = ("mechanism", "handler", "model", "sensitive", "metric", "iteration")


class SummaryError(ValueError):
    pass


@dataclass(frozen=True)
class GroupSummary:
    key: tuple
    n: int
    mean: float
    sd: float
    median: float
    q1: float
    q3: float
    undefined: int

    def to_dict(self, group_by: Sequence[str]) -> dict:
        d = dict(zip(group_by, self.key))
        d.update({k: v for k, v in asdict(self).items() if k != "key"})
        return d


def quantile_lower(values: np.ndarray, q: float) -> float:
    """Order statistic at ``floor(q * (n - 1))``; no interpolation between values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan
    return float(np.quantile(v, q, method="lower"))


def describe(values: Sequence[float], undefined: int = 0, key: tuple = ()) -> GroupSummary:
    v = np.asarray(values, dtype=float)
    n = int(v.size)
    return GroupSummary(
        key=key,
        n=n,
        mean=float(v.mean()) if n else math.nan,
        sd=float(v.std(ddof=1)) if n > 1 else math.nan,
        median=quantile_lower(v, 0.5),
        q1=quantile_lower(v, 0.25),
        q3=quantile_lower(v, 0.75),
        undefined=int(undefined),
    )


def record_value(r: FairnessRecord, absolute: bool) -> float:
    """The record's value, as a magnitude for fairness metrics when ``absolute``."""
    return abs(r.value) if absolute and r.metric in FAIRNESS_METRICS else r.value


def summarize(store: ResultsStore, group_by: Sequence[str], absolute: bool = False) -> list[GroupSummary]:
    """One summary per distinct combination of ``group_by`` values, in first-seen order.

    With ``absolute`` the fairness metrics are summarized as |value|
    (discrimination magnitude); accuracy is left signed either way.
    """
    if len(store) == 0:
        raise SummaryError("empty results store")
    bad = [f for f in group_by if f not in FACTORS]
    if bad:
        raise SummaryError(f"unknown factor(s): {bad}")
    groups: dict[tuple, list[float]] = {}
    undefined: dict[tuple, int] = {}
    for r in store.sorted():
        key = tuple(getattr(r, f) for f in group_by)
        groups.setdefault(key, [])
        undefined.setdefault(key, 0)
        if r.defined:
            groups[key].append(record_value(r, absolute))
        else:
            undefined[key] += 1
    return [describe(vals, undefined[k], k) for k, vals in groups.items()]


def render_summary(rows: list[GroupSummary], group_by: Sequence[str]) -> str:
    head = list(group_by) + ["n", "mean", "sd", "median", "q1", "q3", "undef"]
    lines = [head]
    for s in rows:
        lines.append([str(k) for k in s.key] + [str(s.n)] + [
            f"{x:.4f}" for x in (s.mean, s.sd, s.median, s.q1, s.q3)
        ] + [str(s.undefined)])
    widths = [max(len(line[i]) for line in lines) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in lines)
