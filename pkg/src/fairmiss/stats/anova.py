"""Balanced three-way fixed-effects ANOVA with all interactions."""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .distributions import f_sf
from .tests import StatsError

EFFECT_ORDER = ("A", "B", "C", "AB", "AC", "BC", "ABC")


@dataclass(frozen=True)
class FactorialLayout:
    """Responses of a balanced three-factor design.

    ``responses`` has shape ``(len(levels[0]), len(levels[1]), len(levels[2]), replicates)``.
    """

    factors: tuple[str, str, str]
    levels: tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]
    responses: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.responses, dtype=float)
        object.__setattr__(self, "responses", r)
        shape = tuple(len(lv) for lv in self.levels)
        if r.ndim != 4 or r.shape[:3] != shape:
            raise StatsError(f"responses shape {r.shape} does not match levels {shape}")
        if not np.isfinite(r).all():
            raise StatsError("responses must be finite")

    @property
    def replicates(self) -> int:
        return self.responses.shape[3]

    @classmethod
    def from_cells(
        cls,
        factors: Sequence[str],
        levels: Sequence[Sequence[str]],
        cells: dict[tuple[str, str, str], Sequence[float]],
    ) -> FactorialLayout:
        """Build from a ``(level_a, level_b, level_c) -> values`` map; rejects unbalanced input."""
        levels = tuple(tuple(lv) for lv in levels)
        sizes = {len(v) for v in cells.values()}
        missing = [key for key in itertools.product(*levels) if key not in cells]
        if missing:
            raise StatsError(f"layout has empty cells: {missing[:3]}")
        if len(sizes) != 1:
            raise StatsError(f"unbalanced layout: replicate counts {sorted(sizes)}")
        r = sizes.pop()
        arr = np.empty(tuple(len(lv) for lv in levels) + (r,))
        for idx in itertools.product(*(range(len(lv)) for lv in levels)):
            key = tuple(levels[f][i] for f, i in enumerate(idx))
            arr[idx] = np.asarray(cells[key], dtype=float)
        return cls(tuple(factors), levels, arr)

    def collapsed(self, factor: int) -> list[np.ndarray]:
        """One-way groups for ``factor``, pooling over the other two factors."""
        moved = np.moveaxis(self.responses, factor, 0)
        return [moved[i].ravel() for i in range(moved.shape[0])]

    def cell_residuals(self) -> np.ndarray:
        return (self.responses - self.responses.mean(axis=3, keepdims=True)).ravel()

    def cell_groups(self) -> list[np.ndarray]:
        r = self.responses
        return [r[idx] for idx in itertools.product(*(range(s) for s in r.shape[:3]))]


@dataclass(frozen=True)
class EffectRow:
    effect: str
    ss: float
    df: int
    ms: float
    f: float
    p: float


@dataclass(frozen=True)
class AnovaTable:
    rows: tuple[EffectRow, ...]
    residual_ss: float
    residual_df: int
    total_ss: float
    names: dict = field(default_factory=dict)

    def __getitem__(self, effect: str) -> EffectRow:
        for row in self.rows:
            if row.effect == effect or self.names.get(row.effect) == effect:
                return row
        raise KeyError(effect)

    def label(self, effect: str) -> str:
        return self.names.get(effect, effect)


def anova_three_way(layout: FactorialLayout) -> AnovaTable:
    """Classical sums of squares for all main effects and interactions.

    Under balance Type I, II and III sums of squares coincide; F uses the
    within-cell mean square and p is the upper F tail.
    """
    y = layout.responses
    a, b, c, n = y.shape
    if n < 2:
        raise StatsError("need at least two replicates per cell")
    m = y.mean()
    mA = y.mean(axis=(1, 2, 3))
    mB = y.mean(axis=(0, 2, 3))
    mC = y.mean(axis=(0, 1, 3))
    mAB = y.mean(axis=(2, 3))
    mAC = y.mean(axis=(1, 3))
    mBC = y.mean(axis=(0, 3))
    mABC = y.mean(axis=3)

    eA = mA - m
    eB = mB - m
    eC = mC - m
    eAB = mAB - mA[:, None] - mB[None, :] + m
    eAC = mAC - mA[:, None] - mC[None, :] + m
    eBC = mBC - mB[:, None] - mC[None, :] + m
    eABC = (
        mABC
        - mAB[:, :, None]
        - mAC[:, None, :]
        - mBC[None, :, :]
        + mA[:, None, None]
        + mB[None, :, None]
        + mC[None, None, :]
        - m
    )
    ss = {
        "A": b * c * n * (eA**2).sum(),
        "B": a * c * n * (eB**2).sum(),
        "C": a * b * n * (eC**2).sum(),
        "AB": c * n * (eAB**2).sum(),
        "AC": b * n * (eAC**2).sum(),
        "BC": a * n * (eBC**2).sum(),
        "ABC": n * (eABC**2).sum(),
    }
    df = {
        "A": a - 1,
        "B": b - 1,
        "C": c - 1,
        "AB": (a - 1) * (b - 1),
        "AC": (a - 1) * (c - 1),
        "BC": (b - 1) * (c - 1),
        "ABC": (a - 1) * (b - 1) * (c - 1),
    }
    ss_res = float(((y - mABC[..., None]) ** 2).sum())
    df_res = a * b * c * (n - 1)
    ss_tot = float(((y - m) ** 2).sum())
    scale = max(ss_tot, float((y**2).sum()), 1.0)
    degenerate = ss_tot <= 1e-24 * scale
    if ss_res <= 1e-24 * scale and not degenerate:
        raise StatsError("zero residual variance")
    ms_res = ss_res / df_res
    rows = []
    for eff in EFFECT_ORDER:
        ms = ss[eff] / df[eff] if df[eff] else 0.0
        if degenerate or df[eff] == 0:
            f, p = 0.0, 1.0
        else:
            f = ms / ms_res
            p = f_sf(f, df[eff], df_res)
        rows.append(EffectRow(eff, float(ss[eff]), int(df[eff]), float(ms), float(f), float(p)))
    f0, f1, f2 = layout.factors
    names = {
        "A": f0, "B": f1, "C": f2,
        "AB": f"{f0}*{f1}", "AC": f"{f0}*{f2}", "BC": f"{f1}*{f2}",
        "ABC": f"{f0}*{f1}*{f2}",
    }
    return AnovaTable(tuple(rows), ss_res, df_res, ss_tot, names)
