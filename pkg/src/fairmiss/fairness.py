"""Group fairness metrics as signed privileged-minus-unprivileged differences.

Group 1 is privileged, group 0 unprivileged. A conditional rate whose
conditioning cell is empty is undefined and returned as ``nan``; metrics built
on it are ``nan`` too rather than a fabricated zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METRICS = ("dp", "pe", "eo", "acc")
FAIRNESS_METRICS = ("dp", "pe", "eo")


class FairnessError(ValueError):
    pass


@dataclass(frozen=True)
class GroupCounts:
    n: int
    positives: int  # Y = 1
    predicted_positive: int  # Yhat = 1
    true_positive: int  # Y = 1, Yhat = 1
    false_positive: int  # Y = 0, Yhat = 1

    @property
    def negatives(self) -> int:
        return self.n - self.positives


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


@dataclass(frozen=True)
class GroupRates:
    counts: tuple[GroupCounts, GroupCounts]  # indexed by group (0, 1)

    def _rate(self, s: int, what: str) -> float:
        c = self.counts[s]
        if what == "br":
            return _ratio(c.positives, c.n)
        if what == "ppr":
            return _ratio(c.predicted_positive, c.n)
        if what == "tpr":
            return _ratio(c.true_positive, c.positives)
        if what == "fpr":
            return _ratio(c.false_positive, c.negatives)
        raise KeyError(what)

    def n(self, s: int) -> int:
        return self.counts[s].n

    def base_rate(self, s: int) -> float:
        return self._rate(s, "br")

    def ppr(self, s: int) -> float:
        return self._rate(s, "ppr")

    def tpr(self, s: int) -> float:
        return self._rate(s, "tpr")

    def fpr(self, s: int) -> float:
        return self._rate(s, "fpr")

    def swapped(self) -> GroupRates:
        return GroupRates((self.counts[1], self.counts[0]))


def _binary(x, name: str) -> np.ndarray:
    a = np.asarray(x)
    if a.ndim != 1:
        raise FairnessError(f"{name} must be 1-D")
    if a.size and not np.isin(a, (0, 1)).all():
        raise FairnessError(f"{name} must be binary 0/1")
    return a.astype(np.int64)


def group_rates(y_true, y_pred, s) -> GroupRates:
    y, yh, g = _binary(y_true, "y_true"), _binary(y_pred, "y_pred"), _binary(s, "s")
    if not (len(y) == len(yh) == len(g)):
        raise FairnessError("y_true, y_pred and s must have equal length")
    counts = []
    for grp in (0, 1):
        sel = g == grp
        if not sel.any():
            raise FairnessError(f"group s={grp} is absent")
        yy, pp = y[sel], yh[sel]
        counts.append(
            GroupCounts(
                n=int(sel.sum()),
                positives=int(yy.sum()),
                predicted_positive=int(pp.sum()),
                true_positive=int((yy & pp).sum()),
                false_positive=int(((1 - yy) & pp).sum()),
            )
        )
    return GroupRates((counts[0], counts[1]))


def demographic_parity(r: GroupRates) -> float:
    """P(Yhat=1 | S=1) - P(Yhat=1 | S=0); negative values favour the unprivileged group."""
    return r.ppr(1) - r.ppr(0)


def equality_of_opportunity(r: GroupRates) -> float:
    """Difference in true positive rates."""
    return r.tpr(1) - r.tpr(0)


def predictive_equality(r: GroupRates) -> float:
    """Difference in false positive rates."""
    return r.fpr(1) - r.fpr(0)


def accuracy(y_true, y_pred) -> float:
    y, yh = np.asarray(y_true), np.asarray(y_pred)
    if len(y) != len(yh):
        raise FairnessError("length mismatch")
    if len(y) == 0:
        raise FairnessError("accuracy of an empty prediction vector")
    return float(np.mean(y == yh))


def all_metrics(y_true, y_pred, s) -> dict[str, float]:
    r = group_rates(y_true, y_pred, s)
    return {
        "dp": demographic_parity(r),
        "pe": predictive_equality(r),
        "eo": equality_of_opportunity(r),
        "acc": accuracy(y_true, y_pred),
    }


def dp_from_decomposition(r: GroupRates) -> float:
    """dp rebuilt through the law of total probability from tpr, fpr and base rates."""
    def ppr(s):
        br = r.base_rate(s)
        tpr = r.tpr(s) if r.counts[s].positives else 0.0
        fpr = r.fpr(s) if r.counts[s].negatives else 0.0
        return tpr * br + fpr * (1 - br)

    return ppr(1) - ppr(0)
