"""Self-contained SVG convergence plots with a logarithmic y axis."""
from __future__ import annotations

import math
from html import escape

import numpy as np

from .core import ValidationError

X_AXES = ("iter", "grad_calls", "coord_calls", "bits_sent")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 760, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 200, 30, 60


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return list(np.arange(start, hi + step * 1e-9, step))


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e5 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:g}"


def emit_plot(series, x_axis: str, path, y_label: str = "f_value") -> None:
    """Write one polyline per ``(label, xs, ys)`` to an SVG file.

    Non-positive y values cannot be shown on a log axis and are skipped.
    """
    if x_axis not in X_AXES:
        raise ValidationError(f"x axis must be one of {X_AXES}")
    if not series:
        raise ValidationError("no traces to plot")
    cleaned = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.size < 2:
            raise ValidationError(f"trace {label!r} has a single point; nothing to plot")
        if x_axis != "iter" and not np.any(xs > 0):
            raise ValidationError(f"metric absent for method: trace {label!r} has no {x_axis}")
        keep = ys > 0
        if keep.sum() < 2:
            raise ValidationError(f"trace {label!r} has fewer than two positive {y_label} values")
        cleaned.append((label, xs[keep], ys[keep]))

    x_lo = min(float(s[1].min()) for s in cleaned)
    x_hi = max(float(s[1].max()) for s in cleaned)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    ly_lo = math.floor(min(math.log10(s[2].min()) for s in cleaned))
    ly_hi = math.ceil(max(math.log10(s[2].max()) for s in cleaned))
    if ly_hi == ly_lo:
        ly_hi += 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return TOP + (ly_hi - math.log10(y)) / (ly_hi - ly_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(x_lo, x_hi):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{TOP + ph}" x2="{X:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    for e in range(ly_lo, ly_hi + 1):
        Y = py(10.0 ** e)
        out.append(f'<line x1="{LEFT}" y1="{Y:.2f}" x2="{LEFT + pw}" y2="{Y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{Y + 4:.2f}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_axis)}</text>')
    out.append(
        f'<text x="18" y="{TOP + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + ph / 2})">{escape(y_label)} (log)</text>'
    )
    for idx, (label, xs, ys) in enumerate(cleaned):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = TOP + 10 + 20 * idx
        lx = LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 32}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
