"""Minimal static SVG line plots, no third-party renderer.

Output is a single self-contained <svg> document built from polylines and
text. Supports base-2 logarithmic axes, which is what the dyadic decay and
threshold sweeps need, and an optional annotation slot for fitted slopes.
Deterministic: the same call yields the same byte string.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .errors import DomainError

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

_MARGIN_LEFT = 64.0
_MARGIN_RIGHT = 14.0
_MARGIN_TOP = 30.0
_MARGIN_BOTTOM = 46.0


def _transform(values, log2: bool, axis: str) -> list[float]:
    if not log2:
        return [float(v) for v in values]
    out = []
    for v in values:
        if not v > 0:
            raise DomainError(f"log {axis} axis needs positive values, got {v}")
        out.append(math.log2(v))
    return out


def _span(values) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, log2: bool) -> list[tuple[float, str]]:
    if log2:
        first = math.ceil(lo - 1e-9)
        last = math.floor(hi + 1e-9)
        ks = list(range(first, last + 1))
        while len(ks) > 7:
            ks = ks[::2]
        return [(float(k), f"2^{k}") for k in ks]
    out = []
    for i in range(5):
        v = lo + (hi - lo) * i / 4.0
        out.append((v, f"{v:.4g}"))
    return out


def line_plot(series, *, title: str = "", xlabel: str = "", ylabel: str = "",
              log2_x: bool = False, log2_y: bool = False,
              width: int = 640, height: int = 420,
              annotation: str = "") -> str:
    """Render labeled (x, y) series to an SVG document string.

    ``series`` is a list of ``(label, points)`` pairs where points is a
    non-empty list of (x, y). With ``log2_x``/``log2_y`` the corresponding
    coordinates must be positive and the axis is scaled by log2 with 2^k
    tick labels.
    """
    if not series:
        raise DomainError("plot needs at least one series")
    for label, points in series:
        if not points:
            raise DomainError(f"series {label!r} has no points")

    txs, tys = [], []
    shaped = []
    for label, points in series:
        xs = _transform([p[0] for p in points], log2_x, "x")
        ys = _transform([p[1] for p in points], log2_y, "y")
        shaped.append((str(label), xs, ys))
        txs.extend(xs)
        tys.extend(ys)
    x_lo, x_hi = _span(txs)
    y_lo, y_hi = _span(tys)

    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return height - _MARGIN_BOTTOM - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{escape(title)}</text>')

    axis_color = "#333333"
    x0, y0 = px(x_lo), py(y_lo)
    x1, y1 = px(x_hi), py(y_hi)
    parts.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" '
                 f'y2="{y0:.2f}" stroke="{axis_color}"/>')
    parts.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" '
                 f'y2="{y1:.2f}" stroke="{axis_color}"/>')

    for v, label in _ticks(x_lo, x_hi, log2_x):
        x = px(v)
        parts.append(f'<line x1="{x:.2f}" y1="{y0:.2f}" x2="{x:.2f}" '
                     f'y2="{y0 + 4:.2f}" stroke="{axis_color}"/>')
        parts.append(f'<text x="{x:.2f}" y="{y0 + 17:.2f}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="10">{escape(label)}</text>')
    for v, label in _ticks(y_lo, y_hi, log2_y):
        y = py(v)
        parts.append(f'<line x1="{x0 - 4:.2f}" y1="{y:.2f}" x2="{x0:.2f}" '
                     f'y2="{y:.2f}" stroke="{axis_color}"/>')
        parts.append(f'<text x="{x0 - 7:.2f}" y="{y + 3:.2f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{escape(label)}</text>')

    if xlabel:
        parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{height - 8}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{escape(xlabel)}</text>')
    if ylabel:
        cx, cy = 16.0, (y0 + y1) / 2.0
        parts.append(f'<text x="{cx:.1f}" y="{cy:.1f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12" '
                     f'transform="rotate(-90 {cx:.1f} {cy:.1f})">'
                     f'{escape(ylabel)}</text>')

    for i, (label, xs, ys) in enumerate(shaped):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" '
                         f'r="2.3" fill="{color}"/>')
        ly = _MARGIN_TOP + 14.0 * i
        lx = width - _MARGIN_RIGHT - 150.0
        parts.append(f'<line x1="{lx:.2f}" y1="{ly:.2f}" '
                     f'x2="{lx + 18:.2f}" y2="{ly:.2f}" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 23:.2f}" y="{ly + 3.5:.2f}" '
                     f'font-family="sans-serif" font-size="11">'
                     f'{escape(label)}</text>')

    if annotation:
        parts.append(f'<text x="{x1:.2f}" y="{y0 - 8:.2f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11" fill="#555555">'
                     f'{escape(annotation)}</text>')

    parts.append("</svg>")
    return "\n".join(parts)
