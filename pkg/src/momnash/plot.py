"""Minimal deterministic SVG line charts with log-scaled axes."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 55


def _decades(lo: float, hi: float):
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def _num(v: float) -> str:
    return f"{v:.2f}"


def line_chart_svg(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """Render ``{label: (x, y)}`` on log-log axes; non-positive points are dropped."""
    cleaned = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
        if np.any(keep):
            cleaned[label] = (x[keep], y[keep])
    if cleaned:
        xs = np.concatenate([v[0] for v in cleaned.values()])
        ys = np.concatenate([v[1] for v in cleaned.values()])
        x_dec = _decades(xs.min(), xs.max())
        y_dec = _decades(ys.min(), ys.max())
    else:
        x_dec, y_dec = [0, 1], [0, 1]
    if len(x_dec) < 2:
        x_dec.append(x_dec[0] + 1)
    if len(y_dec) < 2:
        y_dec.append(y_dec[0] + 1)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (math.log10(v) - x_dec[0]) / (x_dec[-1] - x_dec[0]) * pw

    def py(v):
        return TOP + ph - (math.log10(v) - y_dec[0]) / (y_dec[-1] - y_dec[0]) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    for d in x_dec:
        x = px(10.0**d)
        out.append(f'<line x1="{_num(x)}" y1="{TOP}" x2="{_num(x)}" y2="{TOP + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{_num(x)}" y="{TOP + ph + 16}" text-anchor="middle">1e{d}</text>')
    for d in y_dec:
        y = py(10.0**d)
        out.append(f'<line x1="{LEFT}" y1="{_num(y)}" x2="{LEFT + pw}" y2="{_num(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_num(y + 4)}" text-anchor="end">1e{d}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, (x, y)) in enumerate(cleaned.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = TOP + 14 + 18 * i
        lx = LEFT + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(series: dict, path, title: str, xlabel: str, ylabel: str) -> None:
    with open(path, "w") as fh:
        fh.write(line_chart_svg(series, title, xlabel, ylabel))
