"""Dependency-free SVG charts: AUC-vs-contamination lines and score heatmaps."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["sweep_chart", "score_heatmap", "plot_file"]

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _svg(width: int, height: int, body: list[str]) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )


def sweep_chart(series: dict[str, list[tuple[float, float]]], title: str = "") -> str:
    """Line chart of AUC against anomaly ratio, one polyline per series."""
    if not series or not any(series.values()):
        raise ValueError("no data to plot")
    width, height = 640, 420
    left, right, top, bottom = 60, 190, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [x for pts in series.values() for x, _ in pts]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1.0

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1.0 - y) * ph

    body = [f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if title:
        body.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle">{escape(title)}</text>')
    body.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>'
    )
    for tick in np.linspace(0.0, 1.0, 6):
        y = sy(tick)
        body.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        body.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{tick:.1f}</text>')
    for tick in sorted(set(xs)):
        x = sx(tick)
        body.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 4}" stroke="black"/>')
        body.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{tick:g}</text>')
    body.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">|A| / |X|</text>')
    body.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">AUC</text>'
    )
    for i, (name, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = sorted(pts)
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = top + 14 + 18 * i
        lx = left + pw + 12
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text>')
    return _svg(width, height, body)


def _color(v: float) -> str:
    # Blue for low scores, red for high.
    r = int(round(255 * v))
    b = int(round(255 * (1.0 - v)))
    g = int(round(255 * (1.0 - abs(2.0 * v - 1.0)) * 0.6))
    return f"#{r:02x}{g:02x}{b:02x}"


def score_heatmap(x, y, scores, title: str = "") -> str:
    """Heatmap of scores sampled on a regular grid of query points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise ValueError("no data to plot")
    ux = np.unique(x)
    uy = np.unique(y)
    if ux.size * uy.size != s.size:
        raise ValueError("scores do not lie on a full regular grid")
    lo, hi = float(s.min()), float(s.max())
    norm = (s - lo) / (hi - lo) if hi > lo else np.zeros_like(s)
    size = 4
    top = 30 if title else 0
    width, height = ux.size * size, uy.size * size + top
    ix = np.searchsorted(ux, x)
    iy = np.searchsorted(uy, y)
    body = []
    if title:
        body.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{escape(title)}</text>')
    for cx, cy, v in zip(ix, iy, norm):
        py = top + (uy.size - 1 - cy) * size
        body.append(
            f'<rect x="{cx * size}" y="{py}" width="{size}" height="{size}" fill="{_color(v)}"/>'
        )
    return _svg(width, height, body)


def plot_file(path: str | Path, title: str = "") -> str:
    """Render a sweep CSV or an ``x,y,score`` grid CSV to SVG text."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    header, data = rows[0], rows[1:]
    try:
        if header[:2] == ["base", "ratio"]:
            col = {h: i for i, h in enumerate(header)}
            series: dict[str, list] = defaultdict(list)
            for r in data:
                name = f"{r[col['method']]} [{r[col['embedding']]}]"
                series[name].append((float(r[col["ratio"]]), float(r[col["mean_auc"]])))
            return sweep_chart(dict(series), title)
        if header[:3] == ["method", "dataset", "embedding"] and "mean_auc" in header:
            # report CSV: sweep cells are named "<base>@<ratio>"
            col = header.index("mean_auc")
            series = defaultdict(list)
            for r in data:
                if "@" in r[1]:
                    base, ratio = r[1].split("@")
                    series[f"{r[0]} [{r[2]}] {base}"].append((float(ratio), float(r[col])))
            if not series:
                raise ValueError(f"{path}: report has no contamination-sweep cells")
            return sweep_chart(dict(series), title)
        if header == ["x", "y", "score"]:
            arr = np.array([[float(v) for v in r] for r in data])
            return score_heatmap(arr[:, 0], arr[:, 1], arr[:, 2], title)
    except (ValueError, IndexError, KeyError) as exc:
        raise ValueError(f"{path}: malformed row ({exc})") from None
    raise ValueError(f"{path}: unrecognised header {header}")
