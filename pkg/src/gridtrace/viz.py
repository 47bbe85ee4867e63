"""Plot-data builders and a small deterministic SVG renderer.

Builders return :class:`PlotData`, a JSON-ready payload
``{kind, x, series: [{name, y}], events: [{date, label}], meta}``. The
renderer draws it on a fixed 960 x 540 canvas; identical input always yields
identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import FileIOError, GridtraceError
from .frame import SeriesView, format_hour, pearson_matrix

KINDS = ("line", "scatter", "stacked-bar", "histogram", "cdf", "boxplot", "heatmap")
BOX_LEVELS = (0.10, 0.25, 0.50, 0.75, 0.90)

WIDTH, HEIGHT = 960, 540
MARGIN = {"left": 70, "right": 30, "top": 40, "bottom": 60}
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass
class PlotData:
    kind: str
    x: list
    series: list
    events: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GridtraceError("bad-plot", f"unknown plot kind {self.kind!r}")
        for s in self.series:
            y = np.asarray(s["y"], dtype=float)
            if not np.all(np.isfinite(y)):
                raise GridtraceError("non-finite", f"series {s['name']!r} has non-finite values")
            if self.kind != "heatmap" and y.shape[0] != len(self.x):
                raise GridtraceError("misaligned", f"series {s['name']!r} length differs from x")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "x": list(self.x),
                "series": [{"name": s["name"], "y": np.asarray(s["y"], float).tolist()} for s in self.series],
                "events": list(self.events), "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def write_plot_json(plot: PlotData, path) -> Path:
    path = Path(path)
    try:
        path.write_text(plot.to_json() + "\n", encoding="utf-8")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    return path


def _events(events) -> list:
    return [{"date": str(np.datetime64(d, "D")), "label": str(label)} for d, label in (events or [])]


def build_stacked_bar(categories: Mapping[str, Sequence[float]], total: Sequence[float],
                      labels: Sequence | None = None) -> PlotData:
    """Shares of each category in its bar's total, in percent."""
    total = np.asarray(total, dtype=float)
    names = list(categories)
    parts = np.array([np.asarray(categories[k], dtype=float) for k in names])
    labels = list(labels) if labels is not None else list(range(total.size))
    bad = np.flatnonzero(total <= 0)
    if bad.size:
        raise GridtraceError("zero-total", f"bar {labels[bad[0]]!r} has a non-positive total")
    if parts.shape[1:] != total.shape:
        raise GridtraceError("misaligned", "categories and totals differ in length")
    gap = np.abs(parts.sum(axis=0) - total) > 1e-6 * np.abs(total)
    if gap.any():
        raise GridtraceError("bad-total", f"categories do not add up to bar {labels[np.flatnonzero(gap)[0]]!r}")
    # dividing by the category sum keeps each bar at 100 despite rounding in the totals
    shares = parts / parts.sum(axis=0) * 100.0
    return PlotData("stacked-bar", labels, [{"name": n, "y": s} for n, s in zip(names, shares)],
                    meta={"unit": "%"})


def build_boxplot(columns, names: Sequence[str] | None = None) -> PlotData:
    """Five quantiles (10, 25, 50, 75, 90 %) per column, linear interpolation."""
    if isinstance(columns, Mapping):
        names = list(columns)
        columns = [columns[k] for k in names]
    names = list(names) if names is not None else [f"c{i}" for i in range(len(columns))]
    rows = []
    for name, col in zip(names, columns):
        col = np.asarray(col, dtype=float)
        col = col[~np.isnan(col)]
        if col.size < 5:
            raise GridtraceError("short-column", f"column {name!r} has {col.size} values")
        rows.append(np.quantile(col, BOX_LEVELS, method="linear"))
    q = np.array(rows).reshape(len(names), len(BOX_LEVELS))
    return PlotData("boxplot", names,
                    [{"name": f"q{int(lv * 100)}", "y": q[:, i]} for i, lv in enumerate(BOX_LEVELS)])


def build_histogram(sample, bins: int = 10) -> PlotData:
    """Density histogram; ``meta`` carries the bin edges and bin masses."""
    x = np.asarray(sample, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise GridtraceError("empty-sample", "histogram of an empty sample")
    if bins < 1:
        raise GridtraceError("bad-bins", "need at least one bin")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(x, edges)
    mass = counts / x.size
    density = mass / np.diff(edges)
    centres = 0.5 * (edges[:-1] + edges[1:])
    return PlotData("histogram", centres.tolist(), [{"name": "density", "y": density}],
                    meta={"edges": edges.tolist(), "mass": mass.tolist(), "n": int(x.size)})


def build_cdf(sample) -> PlotData:
    """Right-continuous empirical CDF evaluated at each distinct value."""
    x = np.asarray(sample, dtype=float)
    x = np.sort(x[~np.isnan(x)])
    if x.size == 0:
        raise GridtraceError("empty-sample", "CDF of an empty sample")
    values = np.unique(x)
    y = np.searchsorted(x, values, side="right") / x.size
    return PlotData("cdf", values.tolist(), [{"name": "cdf", "y": y}], meta={"n": int(x.size)})


def cdf_at(plot: PlotData, points) -> np.ndarray:
    """Evaluate a CDF payload (a step function) at arbitrary points."""
    xs = np.asarray(plot.x, float)
    ys = np.asarray(plot.series[0]["y"], float)
    idx = np.searchsorted(xs, points, side="right") - 1
    return np.where(idx >= 0, ys[np.clip(idx, 0, None)], 0.0)


def build_heatmap(series: Sequence[SeriesView], names: Sequence[str] | None = None) -> PlotData:
    """Pearson correlation matrix as heat-map rows."""
    m = pearson_matrix(series)
    names = list(names) if names is not None else [f"s{i}" for i in range(len(series))]
    return PlotData("heatmap", names, [{"name": n, "y": m[i]} for i, n in enumerate(names)],
                    meta={"vmin": -1.0, "vmax": 1.0})


def build_line(series: Sequence[SeriesView], events=None, names: Sequence[str] | None = None,
               kind: str = "line") -> PlotData:
    """Time series on a shared x axis (union of timestamps); missing points dropped
    by the renderer."""
    if kind not in ("line", "scatter"):
        raise GridtraceError("bad-plot", "line builder draws line or scatter")
    names = list(names) if names is not None else [f"s{i}" for i in range(len(series))]
    if not series:
        return PlotData(kind, [], [], _events(events))
    grid = np.unique(np.concatenate([s.timestamps for s in series]))
    out = []
    mask = {}
    for name, s in zip(names, series):
        y = np.full(grid.size, np.nan)
        y[np.searchsorted(grid, s.timestamps)] = s.values
        mask[name] = np.flatnonzero(np.isnan(y)).tolist()
        out.append({"name": name, "y": np.nan_to_num(y, nan=0.0)})
    return PlotData(kind, [format_hour(t) for t in grid], out, _events(events),
                    meta={"missing": mask})


# --------------------------------------------------------------------------
# SVG


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self):
        self.parts = []

    def add(self, text: str):
        self.parts.append(text)

    def rect(self, x, y, w, h, fill, extra=""):
        self.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{fill}"{extra}/>')

    def line(self, x1, y1, x2, y2, stroke="#333333", extra=""):
        self.add(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" stroke="{stroke}"{extra}/>')

    def text(self, x, y, s, anchor="middle", size=12, extra=""):
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="{size}" '
                 f'text-anchor="{anchor}"{extra}>{escape(str(s))}</text>')

    def document(self) -> str:
        head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"


def plot_area():
    x0, y0 = MARGIN["left"], MARGIN["top"]
    return x0, y0, WIDTH - MARGIN["right"] - x0, HEIGHT - MARGIN["bottom"] - y0


def _axes(c: _Canvas, title: str = ""):
    x0, y0, w, h = plot_area()
    c.rect(0, 0, WIDTH, HEIGHT, "#ffffff")
    c.line(x0, y0 + h, x0 + w, y0 + h)
    c.line(x0, y0, x0, y0 + h)
    if title:
        c.text(WIDTH / 2, 24, title, size=16)


def _y_scale(lo, hi):
    if not math.isfinite(lo) or not math.isfinite(hi) or lo == hi:
        lo, hi = (lo - 1, hi + 1) if math.isfinite(lo) else (0.0, 1.0)
    x0, y0, w, h = plot_area()
    return lambda v: y0 + h - (v - lo) / (hi - lo) * h, lo, hi


def _y_ticks(c, scale, lo, hi, n=5):
    x0 = MARGIN["left"]
    for v in np.linspace(lo, hi, n):
        y = scale(v)
        c.line(x0 - 4, y, x0, y)
        c.text(x0 - 6, y + 4, f"{v:.4g}", anchor="end", size=10)


def _stacked(c, plot):
    x0, y0, w, h = plot_area()
    nbar = len(plot.x)
    slot = w / max(nbar, 1)
    bw = slot * 0.7
    for b in range(nbar):
        bottom = y0 + h
        bx = x0 + b * slot + (slot - bw) / 2
        for k, s in enumerate(plot.series):
            height = float(s["y"][b]) / 100.0 * h
            c.rect(bx, bottom - height, bw, height, PALETTE[k % len(PALETTE)],
                   f' data-bar="{b}" data-category="{escape(s["name"])}"')
            bottom -= height
        c.text(bx + bw / 2, y0 + h + 16, plot.x[b], size=10)
    scale, lo, hi = _y_scale(0.0, 100.0)
    _y_ticks(c, scale, lo, hi)


def _xy(c, plot):
    x0, y0, w, h = plot_area()
    ys = [np.asarray(s["y"], float) for s in plot.series]
    missing = plot.meta.get("missing", {})
    allv = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    scale, lo, hi = _y_scale(float(allv.min()), float(allv.max()))
    _y_ticks(c, scale, lo, hi)
    n = len(plot.x)
    xpos = [x0 + (i / (n - 1) if n > 1 else 0.5) * w for i in range(n)]
    for k, (s, y) in enumerate(zip(plot.series, ys)):
        colour = PALETTE[k % len(PALETTE)]
        skip = set(missing.get(s["name"], []))
        pts = [(xpos[i], scale(v)) for i, v in enumerate(y) if i not in skip]
        if plot.kind == "scatter":
            for px, py in pts:
                c.add(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="2" fill="{colour}"/>')
        elif plot.kind in ("line", "cdf"):
            if plot.kind == "cdf":
                step = []
                for i, (px, py) in enumerate(pts):
                    if i:
                        step.append((px, step[-1][1]))
                    step.append((px, py))
                pts = step
            if pts:
                path = " ".join(f"{_f(px)},{_f(py)}" for px, py in pts)
                c.add(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        c.text(x0 + w - 4, y0 + 14 * (k + 1), s["name"], anchor="end", size=11,
               extra=f' fill="{colour}"')
    if n:
        for i in sorted({0, n // 2, n - 1}):
            c.text(xpos[i], y0 + h + 16, plot.x[i], size=10)
    if plot.events and n:
        labels = [str(v)[:10] for v in plot.x]
        for ev in plot.events:
            i = int(np.searchsorted(np.array(labels), ev["date"]))
            if i >= n:
                continue
            c.line(xpos[i], y0, xpos[i], y0 + h, "#d62728", ' stroke-dasharray="4,3" class="event"')
            c.text(xpos[i] + 3, y0 + 12, ev["label"], anchor="start", size=10)


def _bars(c, plot):
    x0, y0, w, h = plot_area()
    y = np.asarray(plot.series[0]["y"], float)
    scale, lo, hi = _y_scale(0.0, float(y.max()) if y.size else 1.0)
    _y_ticks(c, scale, lo, hi)
    slot = w / max(y.size, 1)
    for i, v in enumerate(y):
        c.rect(x0 + i * slot, scale(v), slot * 0.95, y0 + h - scale(v), PALETTE[0])


def _box(c, plot):
    x0, y0, w, h = plot_area()
    q = np.array([np.asarray(s["y"], float) for s in plot.series])
    scale, lo, hi = _y_scale(float(q.min()), float(q.max()))
    _y_ticks(c, scale, lo, hi)
    slot = w / max(len(plot.x), 1)
    for j, name in enumerate(plot.x):
        cx = x0 + (j + 0.5) * slot
        bw = slot * 0.5
        c.line(cx, scale(q[0, j]), cx, scale(q[4, j]))
        c.rect(cx - bw / 2, scale(q[3, j]), bw, scale(q[1, j]) - scale(q[3, j]), PALETTE[0],
               ' fill-opacity="0.6"')
        c.line(cx - bw / 2, scale(q[2, j]), cx + bw / 2, scale(q[2, j]), "#000000")
        c.text(cx, y0 + h + 16, name, size=10)


def _heat(c, plot):
    x0, y0, w, h = plot_area()
    k = len(plot.x)
    cell = min(w, h) / max(k, 1)
    for i, s in enumerate(plot.series):
        for j, v in enumerate(np.asarray(s["y"], float)):
            t = (v + 1.0) / 2.0
            r, g, b = int(255 * t), int(255 * (1 - abs(v))), int(255 * (1 - t))
            c.rect(x0 + j * cell, y0 + i * cell, cell, cell, f"#{r:02x}{g:02x}{b:02x}")
            c.text(x0 + (j + 0.5) * cell, y0 + (i + 0.5) * cell + 4, f"{v:.2f}", size=10)
        c.text(x0 - 6, y0 + (i + 0.5) * cell + 4, s["name"], anchor="end", size=10)
        c.text(x0 + (i + 0.5) * cell, y0 + k * cell + 16, s["name"], size=10)


def svg_document(plot: PlotData, title: str = "") -> str:
    c = _Canvas()
    _axes(c, title or plot.meta.get("title", ""))
    if plot.series:
        {"stacked-bar": _stacked, "histogram": _bars, "boxplot": _box,
         "heatmap": _heat}.get(plot.kind, _xy)(c, plot)
    return c.document()


def render_svg(plot: PlotData, path, title: str = "") -> Path:
    """Write ``plot`` as an SVG 1.1 file."""
    path = Path(path)
    try:
        path.write_text(svg_document(plot, title), encoding="utf-8", newline="\n")
    except OSError as exc:
        raise FileIOError("io-error", str(exc)) from None
    return path
