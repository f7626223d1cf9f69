"""Minimal static SVG line plots (no plotting library needed)."""

from __future__ import annotations

from html import escape

import numpy as np

__all__ = ["line_plot", "save_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def line_plot(lines, title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 640, height: int = 400) -> str:
    """Render ``lines`` as an SVG document.

    Parameters
    ----------
    lines : list of (label, x, y)
        One polyline each. Non-finite points are skipped.

    Returns
    -------
    str
    """
    if not lines:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(x, float) for _, x, _ in lines])
    ys = np.concatenate([np.asarray(y, float) for _, _, y in lines])
    ok = np.isfinite(xs) & np.isfinite(ys)
    if not ok.any():
        raise ValueError("no finite points to plot")
    x0, x1 = float(xs[ok].min()), float(xs[ok].max())
    y0, y1 = float(ys[ok].min()), float(ys[ok].max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.1f}" y1="{top + ph}" x2="{sx(t):.1f}" y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{top + ph + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 4}" y1="{sy(t):.1f}" x2="{left}" y2="{sy(t):.1f}" stroke="#444"/>')
        out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="{top - 14}" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>')
    for i, (label, x, y) in enumerate(lines):
        color = _COLORS[i % len(_COLORS)]
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[keep], y[keep]))
        if keep.sum() == 1:
            out.append(f'<circle cx="{sx(x[keep][0]):.2f}" cy="{sy(y[keep][0]):.2f}" r="3" fill="{color}"/>')
        elif pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 * (i + 1)
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_svg(text: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
