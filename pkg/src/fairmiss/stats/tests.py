"""One-way tests: classical and Welch ANOVA, Brown-Forsythe Levene, Shapiro-Wilk."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .distributions import f_sf, norm_ppf, norm_sf, t_sf_two_sided


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    pvalue: float
    df1: float | None = None
    df2: float | None = None

    def __iter__(self):
        # unpacks as (statistic, p) like the usual two-tuple APIs
        return iter((self.statistic, self.pvalue))


def _groups(groups: Sequence, min_n: int = 2) -> list[np.ndarray]:
    out = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(out) < 2:
        raise StatsError("need at least two groups")
    for g in out:
        if g.size < min_n:
            raise StatsError(f"every group needs at least {min_n} observations")
        if not np.isfinite(g).all():
            raise StatsError("groups contain non-finite values")
    return out


def oneway_anova(groups: Sequence) -> TestResult:
    gs = _groups(groups, min_n=1)
    k = len(gs)
    n = sum(g.size for g in gs)
    grand = np.concatenate(gs).mean()
    ss_between = sum(g.size * (g.mean() - grand) ** 2 for g in gs)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in gs)
    df1, df2 = k - 1, n - k
    if df2 <= 0:
        raise StatsError("no residual degrees of freedom")
    if ss_within == 0:
        if ss_between == 0:
            return TestResult(0.0, 1.0, df1, df2)
        return TestResult(math.inf, 0.0, df1, df2)
    f = (ss_between / df1) / (ss_within / df2)
    return TestResult(float(f), f_sf(f, df1, df2), df1, df2)


def welch_anova(groups: Sequence) -> TestResult:
    """Welch's heteroscedastic one-way ANOVA with Satterthwaite denominator df."""
    gs = _groups(groups)
    k = len(gs)
    n = np.array([g.size for g in gs], dtype=float)
    means = np.array([g.mean() for g in gs])
    var = np.array([g.var(ddof=1) for g in gs])
    if (var <= 0).any():
        raise StatsError("every group needs positive variance")
    w = n / var
    sw = w.sum()
    mw = (w * means).sum() / sw
    a = (w * (means - mw) ** 2).sum() / (k - 1)
    lam = ((1 - w / sw) ** 2 / (n - 1)).sum()
    b = 1 + 2 * (k - 2) / (k * k - 1) * lam
    f = a / b
    df1 = k - 1.0
    df2 = (k * k - 1) / (3 * lam)
    return TestResult(float(f), f_sf(f, df1, df2), df1, float(df2))


def welch_t_test(x, y) -> TestResult:
    """Two-sample t test without the equal-variance assumption."""
    x, y = _groups([x, y])
    vx, vy = x.var(ddof=1) / x.size, y.var(ddof=1) / y.size
    t = (x.mean() - y.mean()) / math.sqrt(vx + vy)
    df = (vx + vy) ** 2 / (vx**2 / (x.size - 1) + vy**2 / (y.size - 1))
    return TestResult(float(t), t_sf_two_sided(t, df), None, float(df))


def levene_test(groups: Sequence) -> TestResult:
    """Brown-Forsythe variant: one-way ANOVA on absolute deviations from group medians."""
    gs = _groups(groups)
    z = [np.abs(g - np.median(g)) for g in gs]
    return oneway_anova(z)


# Royston (1995) polynomial approximations, AS R94
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coef: Sequence[float], x: float) -> float:
    out = 0.0
    for c in reversed(coef):
        out = out * x + c
    return out


def shapiro_wilk_coefficients(n: int) -> np.ndarray:
    """Antisymmetric weights a_1..a_n for ordered observations (sum of squares 1)."""
    if n < 3:
        raise StatsError("Shapiro-Wilk needs n >= 3")
    half = n // 2
    a = np.zeros(half)
    if n == 3:
        a[0] = math.sqrt(0.5)
    else:
        m = np.array([norm_ppf((i - 0.375) / (n + 0.25)) for i in range(1, half + 1)])
        summ2 = 2.0 * (m**2).sum()
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _poly(_C1, rsn) - m[0] / ssumm2
        if n > 5:
            a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
            fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1**2 - 2 * a2**2))
            a[1] = a2
            start = 2
        else:
            fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1**2))
            start = 1
        a[0] = a1
        a[start:] = -m[start:] / fac
    full = np.zeros(n)
    full[:half] = -a
    full[n - half :] = a[::-1]
    return full


def shapiro_wilk(sample) -> TestResult:
    """Shapiro-Wilk W with Royston's normalizing transformation for the p-value."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n < 3 or n > 5000:
        raise StatsError("Shapiro-Wilk is defined here for 3 <= n <= 5000")
    if x[-1] - x[0] <= 0:
        raise StatsError("Shapiro-Wilk needs a sample with nonzero spread")
    a = shapiro_wilk_coefficients(n)
    xc = (x - x.mean()) / (x[-1] - x[0])
    w = float((a @ xc) ** 2 / (xc @ xc))
    w = min(w, 1.0)
    if n == 3:
        w = max(w, 0.75)
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return TestResult(w, min(1.0, max(p, 0.0)))
    y = math.log(1.0 - w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return TestResult(w, 1e-99)
        y = -math.log(gamma - y)
        mean = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mean = _poly(_C5, ln)
        sd = math.exp(_poly(_C6, ln))
    if math.isinf(y):
        return TestResult(w, 1.0)
    return TestResult(w, float(norm_sf((y - mean) / sd)))
