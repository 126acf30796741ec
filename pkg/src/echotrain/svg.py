"""Minimal SVG line plots: polylines, optional log axes, labels and notes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    markers: bool = False
    dashed: bool = False


@dataclass
class Figure:
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    logx: bool = False
    logy: bool = False
    width: int = 720
    height: int = 440
    series: list[Series] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, x, y, label="", markers=False, dashed=False) -> "Figure":
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), label, markers, dashed))
        return self

    def render(self) -> str:
        return render(self)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if 1e-3 <= a < 1e4:
        return f"{v:.4g}"
    return f"{v:.1e}".replace("e+0", "e").replace("e-0", "e-")


def _finite(s: Series, logx: bool, logy: bool):
    m = np.isfinite(s.x) & np.isfinite(s.y)
    if logx:
        m &= s.x > 0
    if logy:
        m &= s.y > 0
    return s.x[m], s.y[m]


def render(fig: Figure) -> str:
    W, H = fig.width, fig.height
    left, right, top, bottom = 80, 20, 40 if fig.title else 20, 55
    pw, ph = W - left - right, H - top - bottom
    tx = np.log10 if fig.logx else (lambda v: np.asarray(v, float))
    ty = np.log10 if fig.logy else (lambda v: np.asarray(v, float))

    pts = [_finite(s, fig.logx, fig.logy) for s in fig.series]
    xs = np.concatenate([tx(p[0]) for p in pts if p[0].size] or [np.array([0.0, 1.0])])
    ys = np.concatenate([ty(p[1]) for p in pts if p[1].size] or [np.array([0.0, 1.0])])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    if fig.logy:
        y0, y1 = math.floor(y0), math.ceil(y1)
    else:
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
    if fig.logx:
        x0, x1 = math.floor(x0), math.ceil(x1)

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if fig.title:
        out.append(f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="14">{escape(fig.title)}</text>')

    xticks = list(range(int(x0), int(x1) + 1)) if fig.logx else nice_ticks(x0, x1)
    yticks = list(range(int(y0), int(y1) + 1)) if fig.logy else nice_ticks(y0, y1)
    if fig.logy and len(yticks) > 9:
        stride = math.ceil(len(yticks) / 8)
        yticks = yticks[::stride]
    for v in xticks:
        if x0 - 1e-9 <= v <= x1 + 1e-9:
            X = px(v)
            label = f"1e{int(v)}" if fig.logx else _fmt(v)
            out.append(f'<line x1="{X:.1f}" y1="{top + ph}" x2="{X:.1f}" y2="{top + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.1f}" y="{top + ph + 18}" text-anchor="middle">{label}</text>')
    for v in yticks:
        if y0 - 1e-9 <= v <= y1 + 1e-9:
            Y = py(v)
            label = f"1e{int(v)}" if fig.logy else _fmt(v)
            out.append(f'<line x1="{left - 5}" y1="{Y:.1f}" x2="{left}" y2="{Y:.1f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{Y + 4:.1f}" text-anchor="end">{label}</text>')
    if fig.xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(fig.xlabel)}</text>')
    if fig.ylabel:
        out.append(
            f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(fig.ylabel)}</text>'
        )

    for i, (s, (x, y)) in enumerate(zip(fig.series, pts)):
        if x.size == 0:
            continue
        color = PALETTE[i % len(PALETTE)]
        X, Y = px(tx(x)), py(ty(y))
        if x.size > 1:
            coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(X, Y))
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.3"{dash}/>')
        if s.markers or x.size == 1:
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>' for a, b in zip(X, Y))

    ly = top + 14
    for i, s in enumerate(fig.series):
        if s.label:
            color = PALETTE[i % len(PALETTE)]
            out.append(f'<line x1="{left + pw - 170}" y1="{ly - 4}" x2="{left + pw - 150}" y2="{ly - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw - 145}" y="{ly}">{escape(s.label)}</text>')
            ly += 16
    for j, note in enumerate(fig.notes):
        out.append(f'<text x="{left + 10}" y="{top + 16 + 16 * j}">{escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
