"""Boxplot figures written directly as SVG, each with a JSON sidecar of the drawn numbers."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..ampute import MECHANISMS
from ..classify import BOOST, MODEL_KINDS
from ..fairness import FAIRNESS_METRICS
from ..impute import HANDLERS
from .store import BaselineRecord, ResultsStore
from .summary import quantile_lower, record_value

HANDLER_MODEL = "handler×model"
MECHANISM_HANDLER = "mechanism×handler"
LAYOUTS = (HANDLER_MODEL, MECHANISM_HANDLER)
_ALIASES = {"handler-model": HANDLER_MODEL, "handler_model": HANDLER_MODEL,
            "handlerxmodel": HANDLER_MODEL, "mechanism-handler": MECHANISM_HANDLER,
            "mechanism_handler": MECHANISM_HANDLER, "mechanismxhandler": MECHANISM_HANDLER}
MODEL_LABEL = {BOOST: "b"}


class PlotError(ValueError):
    pass


@dataclass
class BoxStats:
    label: str
    cell: dict
    n: int
    mean: float
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list[float]
    baseline_mean: float | None = None
    baseline_sd: float | None = None


def box_stats(label: str, cell: dict, values: Sequence[float]) -> BoxStats:
    """Quartiles by lower interpolation; whiskers reach the most extreme points within 1.5 IQR."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise PlotError(f"box {label} has no defined values")
    q1, med, q3 = (quantile_lower(v, q) for q in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return BoxStats(
        label, cell, int(v.size), float(v.mean()), q1, med, q3,
        float(inside.min()), float(inside.max()),
        [float(x) for x in v if x < lo_fence or x > hi_fence],
    )


def normalize_layout(layout: str) -> str:
    layout = _ALIASES.get(layout, layout)
    if layout not in LAYOUTS:
        raise PlotError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    return layout


def _cells(store: ResultsStore, layout: str) -> list[tuple[str, dict]]:
    handlers = [h for h in HANDLERS if h in set(store.values("handler"))]
    if layout == HANDLER_MODEL:
        models = [m for m in MODEL_KINDS if m in set(store.values("model"))]
        return [(f"{MODEL_LABEL.get(m, m)}.{h}", {"handler": h, "model": m}) for h in handlers for m in models]
    mechs = [m for m in MECHANISMS if m in set(store.values("mechanism"))]
    return [(f"{h}.{m}", {"mechanism": m, "handler": h}) for m in mechs for h in handlers]


def boxplot_data(
    store: ResultsStore,
    layout: str,
    metric: str,
    sensitive: str | None = None,
    select: dict | None = None,
    baseline: Sequence[BaselineRecord] | None = None,
    absolute: bool | None = None,
) -> dict:
    """Everything the figure draws, as plain numbers."""
    layout = normalize_layout(layout)
    if absolute is None:
        absolute = metric in FAIRNESS_METRICS
    sub = store.filter(metric=metric, **(select or {}))
    sens_levels = sub.values("sensitive")
    if sensitive is None:
        if len(sens_levels) > 1:
            raise PlotError(f"store holds several sensitive variants {sens_levels}; choose one")
        sensitive = sens_levels[0] if sens_levels else None
    sub = sub.filter(sensitive=sensitive)
    if len(sub) == 0:
        raise PlotError(f"no records for metric={metric}, sensitive={sensitive}, select={select}")
    pooled = "mechanism" if layout == HANDLER_MODEL else "model"
    boxes = []
    for label, cell in _cells(sub, layout):
        recs = sub.filter(**cell)
        vals = [record_value(r, absolute) for r in recs if r.defined]
        if not vals:
            raise PlotError(f"cell {cell} has no defined records")
        boxes.append(box_stats(label, cell, vals))
    if baseline:
        by_model = {(b.model, b.sensitive, b.metric): b for b in baseline}
        for box in boxes:
            model = box.cell.get("model") or (select or {}).get("model")
            b = by_model.get((model, sensitive, metric))
            if b is not None and math.isfinite(b.mean):
                box.baseline_mean = abs(b.mean) if absolute else b.mean
                box.baseline_sd = b.sd if math.isfinite(b.sd) else 0.0
    ref = min(b.median for b in boxes)
    return {
        "layout": layout,
        "metric": metric,
        "sensitive": sensitive,
        "absolute": absolute,
        "select": dict(select or {}),
        "pooled_over": sorted(set(sub.values(pooled))) if pooled not in (select or {}) else [],
        "reference_line": ref,
        "boxes": [asdict(b) for b in boxes],
    }


# -- SVG ------------------------------------------------------------------------


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks


def render_svg(data: dict, title: str | None = None) -> str:
    boxes = data["boxes"]
    slot, left, right, top, bottom = 48, 70, 20, 40, 90
    width = left + right + slot * len(boxes)
    height = 420
    plot_h = height - top - bottom
    points = [data["reference_line"]]
    for b in boxes:
        points += [b["whisker_low"], b["whisker_high"], *b["outliers"]]
        if b["baseline_mean"] is not None:
            points += [b["baseline_mean"] - b["baseline_sd"], b["baseline_mean"] + b["baseline_sd"]]
    ticks = _nice_ticks(min(points), max(points))
    y0, y1 = ticks[0], ticks[-1]

    def Y(v: float) -> float:
        return top + plot_h * (1 - (v - y0) / (y1 - y0))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    name = data["metric"] + (" (|value|)" if data["absolute"] else "")
    heading = title or f"{name}, sensitive={data['sensitive']}"
    out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(heading)}</text>')
    for t in ticks:
        out.append(f'<line x1="{left}" y1="{Y(t):.2f}" x2="{width - right}" y2="{Y(t):.2f}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{left - 6}" y="{Y(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>')
    for i, b in enumerate(boxes):
        cx = left + slot * (i + 0.5)
        half = slot * 0.3
        if b["baseline_mean"] is not None:
            lo, hi = b["baseline_mean"] - b["baseline_sd"], b["baseline_mean"] + b["baseline_sd"]
            out.append(
                f'<rect class="baseline" x="{cx - slot / 2:.2f}" y="{Y(hi):.2f}" width="{slot:.2f}" '
                f'height="{max(Y(lo) - Y(hi), 0.5):.2f}" fill="blue" fill-opacity="0.15"/>'
            )
            out.append(
                f'<line x1="{cx - slot / 2:.2f}" y1="{Y(b["baseline_mean"]):.2f}" x2="{cx + slot / 2:.2f}" '
                f'y2="{Y(b["baseline_mean"]):.2f}" stroke="blue"/>'
            )
        out.append(f'<line x1="{cx:.2f}" y1="{Y(b["whisker_high"]):.2f}" x2="{cx:.2f}" y2="{Y(b["q3"]):.2f}" stroke="black"/>')
        out.append(f'<line x1="{cx:.2f}" y1="{Y(b["q1"]):.2f}" x2="{cx:.2f}" y2="{Y(b["whisker_low"]):.2f}" stroke="black"/>')
        for w in (b["whisker_low"], b["whisker_high"]):
            out.append(f'<line x1="{cx - half / 2:.2f}" y1="{Y(w):.2f}" x2="{cx + half / 2:.2f}" y2="{Y(w):.2f}" stroke="black"/>')
        out.append(
            f'<rect class="box" x="{cx - half:.2f}" y="{Y(b["q3"]):.2f}" width="{2 * half:.2f}" '
            f'height="{max(Y(b["q1"]) - Y(b["q3"]), 0.5):.2f}" fill="#dddddd" stroke="black"/>'
        )
        out.append(f'<line x1="{cx - half:.2f}" y1="{Y(b["median"]):.2f}" x2="{cx + half:.2f}" y2="{Y(b["median"]):.2f}" stroke="black" stroke-width="2"/>')
        for o in b["outliers"]:
            out.append(f'<circle cx="{cx:.2f}" cy="{Y(o):.2f}" r="2" fill="none" stroke="black"/>')
        ly = top + plot_h + 12
        out.append(
            f'<text x="{cx:.2f}" y="{ly:.2f}" text-anchor="end" '
            f'transform="rotate(-45 {cx:.2f} {ly:.2f})">{escape(b["label"])}</text>'
        )
    ry = Y(data["reference_line"])
    out.append(f'<line class="reference" x1="{left}" y1="{ry:.2f}" x2="{width - right}" y2="{ry:.2f}" stroke="red"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_boxplots(
    store: ResultsStore,
    layout: str,
    metric: str,
    out_path: str | Path,
    sensitive: str | None = None,
    select: dict | None = None,
    baseline: Sequence[BaselineRecord] | None = None,
    absolute: bool | None = None,
) -> tuple[Path, Path]:
    """Write the SVG to ``out_path`` and the sidecar next to it (same stem, ``.json``)."""
    data = boxplot_data(store, layout, metric, sensitive, select, baseline, absolute)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(render_svg(data), encoding="utf-8")
    side = out_path.with_suffix(".json")
    side.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return out_path, side
