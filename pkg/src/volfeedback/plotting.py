"""Minimal deterministic SVG line charts with the plotted data embedded as comments."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Series", "line_chart", "write_chart"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


class Series:
    def __init__(self, label: str, x, y, dashed: bool = False, markers: bool = False) -> None:
        self.label = label
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.dashed = dashed
        self.markers = markers


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def line_chart(
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    hlines: Sequence[tuple[float, str]] = (),
    logy: bool = False,
    width: int = 760,
    height: int = 440,
) -> str:
    """Render series as an SVG document string."""
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def ty(v):
        return np.log10(v) if logy else v

    xs = np.concatenate([s.x[np.isfinite(s.y)] for s in series]) if series else np.array([0.0, 1.0])
    ys = np.concatenate([ty(s.y[np.isfinite(s.y) & ((s.y > 0) if logy else True)]) for s in series]) if series else np.array([0.0])
    ys = np.concatenate([ys, [ty(v) for v, _ in hlines if not logy or v > 0]])
    if xs.size == 0:
        xs = np.array([0.0, 1.0])
    if ys.size == 0:
        ys = np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for s in series:
        pts = ";".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(s.x, s.y))
        out.append(f"<!-- data {escape(s.label).replace('--', '- -')}: {pts} -->")
    out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    for t in _nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _nice_ticks(y0, y1):
        Y = py(t)
        label = _fmt(10**t) if logy else _fmt(t)
        out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="#444"/>')
        out.append(f'<line x1="{left}" y1="{Y:.2f}" x2="{left + pw}" y2="{Y:.2f}" stroke="#eee"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for v, label in hlines:
        if logy and v <= 0:
            continue
        Y = py(ty(v))
        out.append(
            f'<line x1="{left}" y1="{Y:.2f}" x2="{left + pw}" y2="{Y:.2f}" '
            f'stroke="#888" stroke-dasharray="6,4"/>'
        )
        out.append(f'<text x="{left + pw + 4}" y="{Y + 4:.2f}" fill="#666">{escape(label)}</text>')
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(s.y) & ((s.y > 0) if logy else True)
        coords = " ".join(f"{px(a):.2f},{py(ty(b)):.2f}" for a, b in zip(s.x[ok], s.y[ok]))
        dash = ' stroke-dasharray="4,3"' if s.dashed else ""
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4"{dash} points="{coords}"/>')
        if s.markers:
            for a, b in zip(s.x[ok], s.y[ok]):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(ty(b)):.2f}" r="2.5" fill="{color}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw + 8}" y1="{ly}" x2="{left + pw + 28}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_chart(path, *args, **kwargs) -> None:
    Path(path).write_text(line_chart(*args, **kwargs), encoding="utf-8")
