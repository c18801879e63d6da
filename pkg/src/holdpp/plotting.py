"""Minimal SVG output: 800x800 canvas, data-range autoscaling with a 5% margin."""
from __future__ import annotations

from html import escape

import numpy as np

SIZE = 800
MARGIN = 0.05
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


def _scale(lo, hi):
    span = hi - lo
    if span <= 0:
        span = 1.0
        lo -= 0.5
    lo -= MARGIN * span
    span *= 1 + 2 * MARGIN
    return lo, span


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<text x="10" y="20" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]


def scatter_svg(samples, data=None, title: str = "samples (colour) over data (grey)") -> str:
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if samples.shape[0] == 0:
        raise ValueError("nothing to plot")
    if samples.shape[1] == 1:
        samples = np.hstack([samples, np.zeros_like(samples)])
    layers = [samples]
    if data is not None:
        data = np.atleast_2d(np.asarray(data, dtype=np.float64))
        if data.shape[1] == 1:
            data = np.hstack([data, np.zeros_like(data)])
        if data.shape[1] != samples.shape[1]:
            raise ValueError("data and samples have different dimensions")
        layers.append(data)
    pts = np.vstack(layers)[:, :2]
    x0, xs = _scale(pts[:, 0].min(), pts[:, 0].max())
    y0, ys = _scale(pts[:, 1].min(), pts[:, 1].max())

    def circles(p, colour, r, opacity):
        px = (p[:, 0] - x0) / xs * SIZE
        py = SIZE - (p[:, 1] - y0) / ys * SIZE
        return [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{r}" fill="{colour}" fill-opacity="{opacity}"/>' for a, b in zip(px, py)]

    out = _header(title)
    if data is not None:
        out += circles(data[:, :2], "#888888", 1.5, 0.5)
    out += circles(samples[:, :2], PALETTE[0], 1.5, 0.7)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trajectory_svg(times, paths, title: str = "position paths") -> str:
    """One polyline per chain; ``paths`` has shape ``(len(times), chains)``."""
    times = np.asarray(times, dtype=np.float64)
    paths = np.asarray(paths, dtype=np.float64)
    if paths.ndim != 2 or paths.shape[0] != times.shape[0] or paths.shape[1] == 0:
        raise ValueError("paths must have shape (len(times), chains >= 1)")
    x0, xs = _scale(times.min(), times.max())
    y0, ys = _scale(paths.min(), paths.max())
    px = (times - x0) / xs * SIZE
    out = _header(title)
    for c in range(paths.shape[1]):
        py = SIZE - (paths[:, c] - y0) / ys * SIZE
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        colour = PALETTE[c % len(PALETTE)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
