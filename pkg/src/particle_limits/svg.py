"""Standalone SVG line plots with byte-deterministic output.

Coordinates are printed with a fixed number of decimals and nothing depends
on the clock or the environment, so equal input gives equal bytes.
"""
from dataclasses import dataclass, field
import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Axes:
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    xlog: bool = False
    ylog: bool = False
    annotations: list = field(default_factory=list)
    markers: bool = False


def _fmt(v):
    return f"{v:.2f}"


def _label(v):
    return f"{v:.3g}"


def _transform(values, log, name):
    out = []
    for v in values:
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"non-finite {name} value {v!r}")
        if log:
            if v <= 0:
                raise ValueError(f"log {name} axis needs positive data, got {v!r}")
            v = math.log10(v)
        out.append(v)
    return out


def _ticks(lo, hi, log):
    if log:
        first, last = math.ceil(lo - 1e-9), math.floor(hi + 1e-9)
        if last >= first:
            return [(float(k), _label(10.0**k)) for k in range(first, last + 1)]
        return [(lo, _label(10.0**lo)), (hi, _label(10.0**hi))]
    return [(lo + (hi - lo) * i / 4, _label(lo + (hi - lo) * i / 4)) for i in range(5)]


def emit_svg(series, axes=None):
    """Render ``series`` (a list of ``(label, xs, ys)``) as an SVG document string.

    The data bounding box maps exactly onto the plot box. Raises ValueError
    for an empty series list, an empty series, or nonpositive data on a log axis.
    """
    axes = axes or Axes()
    if not series:
        raise ValueError("need at least one series")
    prepared = []
    for label, xs, ys in series:
        xs, ys = list(xs), list(ys)
        if not xs or len(xs) != len(ys):
            raise ValueError(f"series {label!r} is empty or has mismatched x/y lengths")
        prepared.append((str(label), _transform(xs, axes.xlog, "x"), _transform(ys, axes.ylog, "y")))
    x_lo = min(min(xs) for _, xs, _ in prepared)
    x_hi = max(max(xs) for _, xs, _ in prepared)
    y_lo = min(min(ys) for _, _, ys in prepared)
    y_hi = max(max(ys) for _, _, ys in prepared)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return TOP + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>',
    ]
    for v, text in _ticks(x_lo, x_hi, axes.xlog):
        x = _fmt(px(v))
        out.append(f'<line x1="{x}" y1="{TOP + ph}" x2="{x}" y2="{TOP + ph + 5}" stroke="#000000"/>')
        out.append(f'<text x="{x}" y="{TOP + ph + 18}" text-anchor="middle">{escape(text)}</text>')
    for v, text in _ticks(y_lo, y_hi, axes.ylog):
        y = _fmt(py(v))
        out.append(f'<line x1="{LEFT - 5}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="#000000"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">'
                   f'{escape(text)}</text>')
    if axes.xlabel:
        out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">'
                   f'{escape(axes.xlabel)}</text>')
    if axes.ylabel:
        out.append(f'<text x="16" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {TOP + ph / 2:.2f})">{escape(axes.ylabel)}</text>')
    if axes.title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle">{escape(axes.title)}</text>')
    for k, (label, xs, ys) in enumerate(prepared):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5">'
                   f'<title>{escape(label)}</title></polyline>')
        if axes.markers:
            for x, y in zip(xs, ys):
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{LEFT + pw - 6}" y="{TOP + 16 + 15 * k}" text-anchor="end" '
                   f'fill="{color}">{escape(label)}</text>')
    for k, note in enumerate(axes.annotations):
        out.append(f'<text x="{LEFT + 8}" y="{TOP + 16 + 15 * k}">{escape(str(note))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def slope_note(slope):
    """Annotation text for a fitted log-log slope, to three decimals."""
    return "slope = n/a" if slope is None else f"slope = {slope:.3f}"
