"""Self-contained SVG figures for series, benchmark aggregates and trade-off curves."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .series import CountSeries, segments_from_mask

WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=64, right=170, top=40, bottom=48)
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class EmptyPlotError(ValueError):
    pass


def _fmt(v: float) -> str:
    return f"{v:.2f}"


@dataclass
class Axes:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self) -> None:
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5

    def px(self, x: float) -> float:
        span = WIDTH - MARGIN["left"] - MARGIN["right"]
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * span

    def py(self, y: float) -> float:
        span = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        return HEIGHT - MARGIN["bottom"] - (y - self.y0) / (self.y1 - self.y0) * span


def _canvas(title: str) -> ET.Element:
    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
    )
    ET.SubElement(svg, "rect", width=str(WIDTH), height=str(HEIGHT), fill="white")
    if title:
        t = ET.SubElement(svg, "text", x=str(WIDTH / 2), y="22", attrib={"text-anchor": "middle"})
        t.set("font-size", "15")
        t.text = title
    return svg


def _axes(svg: ET.Element, ax: Axes, xlabel: str, ylabel: str, xticks=None, yticks=None) -> None:
    g = ET.SubElement(svg, "g", attrib={"class": "axes", "stroke": "black", "font-size": "11"})
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    ET.SubElement(g, "line", x1=str(left), y1=str(bottom), x2=str(right), y2=str(bottom))
    ET.SubElement(g, "line", x1=str(left), y1=str(top), x2=str(left), y2=str(bottom))
    for v, label in xticks or [(v, f"{v:g}") for v in np.linspace(ax.x0, ax.x1, 5)]:
        x = ax.px(v)
        ET.SubElement(g, "line", x1=_fmt(x), y1=str(bottom), x2=_fmt(x), y2=str(bottom + 4))
        t = ET.SubElement(g, "text", x=_fmt(x), y=str(bottom + 16), stroke="none",
                          attrib={"text-anchor": "middle"})
        t.text = label
    for v, label in yticks or [(v, f"{v:.3g}") for v in np.linspace(ax.y0, ax.y1, 5)]:
        y = ax.py(v)
        ET.SubElement(g, "line", x1=str(left - 4), y1=_fmt(y), x2=str(left), y2=_fmt(y))
        t = ET.SubElement(g, "text", x=str(left - 6), y=_fmt(y + 4), stroke="none",
                          attrib={"text-anchor": "end"})
        t.text = label
    t = ET.SubElement(g, "text", x=str((left + right) / 2), y=str(HEIGHT - 10), stroke="none",
                      attrib={"text-anchor": "middle"})
    t.text = xlabel
    t = ET.SubElement(g, "text", x="14", y=str((top + bottom) / 2), stroke="none",
                      transform=f"rotate(-90 14 {(top + bottom) / 2})",
                      attrib={"text-anchor": "middle"})
    t.text = ylabel


def _legend(svg: ET.Element, labels: Sequence[str]) -> None:
    g = ET.SubElement(svg, "g", attrib={"class": "legend", "font-size": "11"})
    x = WIDTH - MARGIN["right"] + 12
    for i, label in enumerate(labels):
        y = MARGIN["top"] + 16 * i
        ET.SubElement(g, "rect", x=str(x), y=str(y), width="10", height="10",
                      fill=PALETTE[i % len(PALETTE)])
        t = ET.SubElement(g, "text", x=str(x + 14), y=str(y + 9))
        t.text = label


def _write(svg: ET.Element, path: str | Path) -> None:
    ET.indent(svg)
    Path(path).write_text(ET.tostring(svg, encoding="unicode") + "\n", encoding="utf-8")


def series_with_anomalies(series: CountSeries, path: str | Path, title: str = "") -> None:
    n = len(series)
    if n == 0:
        raise EmptyPlotError("series is empty")
    values = series.values.astype(float)
    ax = Axes(0, n - 1, 0, float(values.max()) * 1.05 or 1.0)
    svg = _canvas(title or series.meta.get("id", ""))
    shade = ET.SubElement(svg, "g", attrib={"class": "anomalies", "fill": "#d62728", "fill-opacity": "0.2"})
    if series.labels is not None:
        for seg in segments_from_mask(series.labels):
            x0, x1 = ax.px(seg.start - 0.5), ax.px(seg.end - 0.5)
            ET.SubElement(shade, "rect", x=_fmt(x0), y=str(MARGIN["top"]), width=_fmt(x1 - x0),
                          height=str(HEIGHT - MARGIN["top"] - MARGIN["bottom"]))
    _axes(svg, ax, "t", "count")
    pts = " ".join(f"{_fmt(ax.px(t))},{_fmt(ax.py(v))}" for t, v in enumerate(values))
    ET.SubElement(svg, "polyline", points=pts, fill="none", stroke=PALETTE[0],
                  attrib={"class": "series", "stroke-width": "1"})
    _write(svg, path)


def metric_vs_count(
    rows: Iterable[Mapping],
    path: str | Path,
    metric: str = "auprc",
    r: float | None = None,
    smoother: str | None = "none",
    log_y: bool = False,
    title: str = "",
) -> int:
    """Mean metric against log2(A), one polyline with +-std bars per detector (and r).

    Returns the number of polylines drawn.
    """
    chosen = [
        row for row in rows
        if row["metric"] == metric
        and isinstance(row["A"], float)
        and (r is None or math.isclose(row["r"], r))
        and (smoother is None or row["smoother"] == smoother)
    ]
    if not chosen:
        raise EmptyPlotError("no aggregate rows match the requested metric/r/smoother")
    several_r = len({row["r"] for row in chosen}) > 1
    several_sm = len({row["smoother"] for row in chosen}) > 1
    groups: dict[str, list[Mapping]] = {}
    for row in chosen:
        label = row["detector"]
        if several_sm:
            label += f" [{row['smoother']}]"
        if several_r:
            label += f" r={row['r']:g}"
        groups.setdefault(label, []).append(row)

    def ty(v: float) -> float:
        return math.log10(max(v, 1e-6)) if log_y else v

    xs = [math.log2(row["A"]) for row in chosen]
    lo = [ty(row["mean"] - row["std"]) for row in chosen]
    hi = [ty(row["mean"] + row["std"]) for row in chosen]
    ax = Axes(min(xs), max(xs), min(lo), max(hi))
    svg = _canvas(title or f"{metric} vs count level")
    ticks = [(x, f"2^{x:g}") for x in sorted(set(xs))]
    _axes(svg, ax, "log2(A)", f"log10 {metric}" if log_y else metric, xticks=ticks)
    for i, (label, members) in enumerate(sorted(groups.items())):
        color = PALETTE[i % len(PALETTE)]
        members = sorted(members, key=lambda m: m["A"])
        g = ET.SubElement(svg, "g", attrib={"class": "series", "data-label": label})
        pts = " ".join(f"{_fmt(ax.px(math.log2(m['A'])))},{_fmt(ax.py(ty(m['mean'])))}" for m in members)
        ET.SubElement(g, "polyline", points=pts, fill="none", stroke=color,
                      attrib={"stroke-width": "1.5"})
        for m in members:
            x = _fmt(ax.px(math.log2(m["A"])))
            ET.SubElement(g, "line", x1=x, x2=x, stroke=color,
                          y1=_fmt(ax.py(ty(m["mean"] - m["std"]))),
                          y2=_fmt(ax.py(ty(m["mean"] + m["std"]))),
                          attrib={"class": "errorbar"})
    _legend(svg, sorted(groups))
    _write(svg, path)
    return len(groups)


def f1_vs_ttd(
    curves: Mapping[str, Sequence[Sequence[float]]], path: str | Path, title: str = ""
) -> int:
    """Scatter of (mean TTD, F1) per threshold, one group per smoother. Returns point count."""
    curves = {k: v for k, v in curves.items() if len(v)}
    if not curves:
        raise EmptyPlotError("no trade-off points to plot")
    ttd = [p[2] for pts in curves.values() for p in pts]
    f1 = [p[1] for pts in curves.values() for p in pts]
    ax = Axes(0.0, max(ttd), 0.0, max(max(f1), 1e-9))
    svg = _canvas(title or "F1 vs time-to-detection")
    _axes(svg, ax, "mean time-to-detection (steps)", "F1")
    count = 0
    for i, (label, pts) in enumerate(curves.items()):
        g = ET.SubElement(svg, "g", attrib={"class": "series", "data-label": label},
                          fill=PALETTE[i % len(PALETTE)])
        for thr, f, d in pts:
            c = ET.SubElement(g, "circle", cx=_fmt(ax.px(d)), cy=_fmt(ax.py(f)), r="2.5")
            ET.SubElement(c, "title").text = f"threshold={thr:.4g}"
            count += 1
    _legend(svg, list(curves))
    _write(svg, path)
    return count


def improvement_heatmap(
    cells: Mapping[tuple[str, float], float], path: str | Path, title: str = ""
) -> int:
    """Detector x log2(A) grid of percent AUPRC change. Returns the number of cells."""
    if not cells:
        raise EmptyPlotError("no improvement values to plot")
    detectors = sorted({d for d, _ in cells})
    levels = sorted({a for _, a in cells})
    svg = _canvas(title or "AUPRC improvement from EMA smoothing (%)")
    left = 190
    cw = (WIDTH - left - 20) / len(levels)
    ch = (HEIGHT - MARGIN["top"] - MARGIN["bottom"]) / len(detectors)
    scale = max(abs(v) for v in cells.values()) or 1.0
    g = ET.SubElement(svg, "g", attrib={"class": "heatmap", "font-size": "10"})
    for i, det in enumerate(detectors):
        t = ET.SubElement(g, "text", x=str(left - 6), y=_fmt(MARGIN["top"] + (i + 0.6) * ch),
                          attrib={"text-anchor": "end"})
        t.text = det
        for j, a in enumerate(levels):
            if (det, a) not in cells:
                continue
            v = cells[(det, a)]
            frac = min(abs(v) / scale, 1.0)
            shade = int(round(255 * (1 - frac)))
            color = f"rgb({shade},{shade},255)" if v >= 0 else f"rgb(255,{shade},{shade})"
            x, y = left + j * cw, MARGIN["top"] + i * ch
            rect = ET.SubElement(g, "rect", x=_fmt(x), y=_fmt(y), width=_fmt(cw), height=_fmt(ch),
                                 fill=color, stroke="white", attrib={"class": "cell"})
            ET.SubElement(rect, "title").text = f"{det} A={a:g}: {v:+.1f}%"
            t = ET.SubElement(g, "text", x=_fmt(x + cw / 2), y=_fmt(y + ch * 0.6),
                              attrib={"text-anchor": "middle"})
            t.text = f"{v:+.0f}"
    for j, a in enumerate(levels):
        t = ET.SubElement(g, "text", x=_fmt(left + (j + 0.5) * cw), y=str(HEIGHT - MARGIN["bottom"] + 16),
                          attrib={"text-anchor": "middle"})
        t.text = f"2^{math.log2(a):g}"
    _write(svg, path)
    return sum(1 for _ in cells)
