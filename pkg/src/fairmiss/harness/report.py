"""Three-way ANOVA report over the mechanism x handler x model grid.

For each (metric, sensitive variant) the report builds the balanced layout,
runs the assumption tests and picks a route per main effect. When the
Brown-Forsythe Levene test rejects equal cell variances (p < 0.05) the main
effects are tested with Welch's ANOVA on the one-way layout of that factor
(pooled over the other two) and marked with a dagger; interactions always
come from the classical table. Shapiro-Wilk on the cell residuals is reported
but does not change the route.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..ampute import MECHANISMS
from ..classify import MODEL_KINDS
from ..fairness import METRICS
from ..impute import HANDLERS
from ..stats import FactorialLayout, StatsError, anova_three_way, levene_test, shapiro_wilk, welch_anova
from .store import ResultsStore

ROW_NAMES = ("mdm", "imp", "mod", "mdm*imp", "mdm*mod", "imp*mod", "mdm*imp*mod")
_EFFECTS = ("A", "B", "C", "AB", "AC", "BC", "ABC")
ALPHA = 0.05
SW_MAX = 5000
DAGGER = "†"


class ReportError(ValueError):
    pass


def stars(p: float) -> str:
    if math.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass
class EffectResult:
    name: str
    statistic: float
    df1: float
    df2: float
    p: float
    welch: bool = False

    @property
    def stars(self) -> str:
        return stars(self.p)

    def cell(self) -> str:
        return f"{self.p:.4f}{self.stars}{DAGGER if self.welch else ''}"


@dataclass
class SectionReport:
    metric: str
    sensitive: str
    replicates: int
    dropped_iterations: list[int] = field(default_factory=list)
    levene_p: float = math.nan
    shapiro_p: float = math.nan
    shapiro_n: int = 0
    welch_routed: bool = False
    effects: list[EffectResult] = field(default_factory=list)
    error: str | None = None

    def effect(self, name: str) -> EffectResult:
        for e in self.effects:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = asdict(self)
        for e, src in zip(d["effects"], self.effects):
            e["stars"] = src.stars
        return d


def _levels(store: ResultsStore, name: str, order: tuple) -> tuple[str, ...]:
    present = set(store.values(name))
    return tuple(v for v in order if v in present) + tuple(sorted(present - set(order)))


def build_layout(store: ResultsStore, metric: str, sensitive: str) -> tuple[FactorialLayout, list[int]]:
    """Balanced mechanism x handler x model layout with iterations as replicates.

    An iteration in which any cell is undefined is dropped from every cell
    (pairwise exclusion keeps the design balanced); the dropped iterations are
    returned. A cell with no record at all for an iteration is a hole and is
    rejected.
    """
    sub = store.filter(metric=metric, sensitive=sensitive)
    if len(sub) == 0:
        raise ReportError(f"no records for metric={metric} sensitive={sensitive}")
    levels = (
        _levels(sub, "mechanism", MECHANISMS),
        _levels(sub, "handler", HANDLERS),
        _levels(sub, "model", MODEL_KINDS),
    )
    iterations = sorted(set(sub.values("iteration")))
    table: dict[tuple, dict[int, float]] = {}
    for r in sub:
        slot = table.setdefault((r.mechanism, r.handler, r.model), {})
        if r.iteration in slot:
            raise ReportError(f"duplicate record for {r.cell()} iteration {r.iteration}")
        slot[r.iteration] = r.value if r.defined else math.nan
    cells = [(a, b, c) for a in levels[0] for b in levels[1] for c in levels[2]]
    for cell in cells:
        got = table.get(cell, {})
        if set(got) != set(iterations):
            raise ReportError(f"unbalanced store: cell {cell} lacks iterations {sorted(set(iterations) - set(got))}")
    dropped = [i for i in iterations if any(math.isnan(table[cell][i]) for cell in cells)]
    keep = [i for i in iterations if i not in dropped]
    if dropped:
        warnings.warn(
            f"{metric}/{sensitive}: dropping iterations {dropped} with undefined cells", stacklevel=2
        )
    if len(keep) < 2:
        raise ReportError(f"{metric}/{sensitive}: fewer than two complete iterations")
    layout = FactorialLayout.from_cells(
        ("mdm", "imp", "mod"), levels, {cell: [table[cell][i] for i in keep] for cell in cells}
    )
    return layout, dropped


def _thin(x: np.ndarray, limit: int) -> np.ndarray:
    if x.size <= limit:
        return x
    return x[np.linspace(0, x.size - 1, limit).round().astype(np.int64)]


def analyze(layout: FactorialLayout) -> tuple[list[EffectResult], dict]:
    """Effect rows in Table order plus the assumption-test details."""
    info: dict = {"levene_p": math.nan, "shapiro_p": math.nan, "shapiro_n": 0, "welch_routed": False}
    try:
        info["levene_p"] = levene_test(layout.cell_groups()).pvalue
    except StatsError:
        pass
    resid = _thin(layout.cell_residuals(), SW_MAX)
    info["shapiro_n"] = int(resid.size)
    try:
        info["shapiro_p"] = shapiro_wilk(resid).pvalue
    except StatsError:
        pass
    tab = anova_three_way(layout)
    routed = info["levene_p"] < ALPHA
    out = []
    for k, (eff, name) in enumerate(zip(_EFFECTS, ROW_NAMES)):
        row = tab[eff]
        res = EffectResult(name, row.f, row.df, tab.residual_df, row.p)
        if routed and k < 3 and len(layout.levels[k]) > 1:
            try:
                w = welch_anova(layout.collapsed(k))
                res = EffectResult(name, w.statistic, w.df1, w.df2, w.pvalue, welch=True)
                info["welch_routed"] = True
            except StatsError:
                pass
        out.append(res)
    return out, info


def anova_report(store: ResultsStore) -> list[SectionReport]:
    sections = []
    sens_levels = sorted(set(store.values("sensitive")))
    metrics = [m for m in METRICS if m in set(store.values("metric"))]
    for metric in metrics:
        for sens in sens_levels:
            try:
                layout, dropped = build_layout(store, metric, sens)
            except ReportError as exc:
                if "unbalanced" in str(exc) or "duplicate" in str(exc):
                    raise
                sections.append(SectionReport(metric, sens, 0, error=str(exc)))
                continue
            sec = SectionReport(metric, sens, layout.replicates, dropped)
            try:
                effects, info = analyze(layout)
            except StatsError as exc:
                sec.error = str(exc)
            else:
                sec.effects = effects
                sec.levene_p = info["levene_p"]
                sec.shapiro_p = info["shapiro_p"]
                sec.shapiro_n = info["shapiro_n"]
                sec.welch_routed = info["welch_routed"]
            sections.append(sec)
    return sections


def render_report(sections: list[SectionReport]) -> str:
    head = ["metric", "sensitive", *ROW_NAMES]
    rows = [head]
    for s in sections:
        if s.error:
            rows.append([s.metric, s.sensitive] + ["n/a"] * len(ROW_NAMES))
        else:
            rows.append([s.metric, s.sensitive] + [e.cell() for e in s.effects])
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.append("")
    lines.append(f"* p<0.05  ** p<0.01  *** p<0.001  {DAGGER} Welch-ANOVA (Levene p<{ALPHA})")
    lines.append("")
    for s in sections:
        if s.error:
            lines.append(f"{s.metric}/{s.sensitive}: {s.error}")
            continue
        note = f"{s.metric}/{s.sensitive}: replicates={s.replicates}, Levene p={s.levene_p:.4g}, " \
               f"Shapiro-Wilk p={s.shapiro_p:.4g} (n={s.shapiro_n})"
        if s.dropped_iterations:
            note += f", dropped iterations {s.dropped_iterations}"
        lines.append(note)
    return "\n".join(lines) + "\n"


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def emit_anova_report(store: ResultsStore, out_dir: str | Path, stem: str = "anova") -> tuple[Path, Path]:
    """Write ``<stem>.txt`` and ``<stem>.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sections = anova_report(store)
    txt, js = out_dir / f"{stem}.txt", out_dir / f"{stem}.json"
    txt.write_text(render_report(sections), encoding="utf-8")
    payload = {"rows": list(ROW_NAMES), "alpha": ALPHA, "sections": [s.to_dict() for s in sections]}
    js.write_text(json.dumps(_json_safe(payload), indent=2) + "\n", encoding="utf-8")
    return txt, js
