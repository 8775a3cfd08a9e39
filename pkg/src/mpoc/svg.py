"""Hand-rolled SVG output: region maps and trajectory charts.

Everything is emitted as plain path/rect/text elements with a fixed viewBox;
no plotting dependency.  Colors cycle through a small qualitative palette.
"""

from __future__ import annotations

import numpy as np

PALETTE = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
           "#76b7b2", "#edc948", "#9c755f", "#bab0ac", "#17becf"]

WIDTH, HEIGHT = 640, 480
MARGIN = 56


def _esc(s) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


class _Canvas:
    def __init__(self, x_range, y_range, width=WIDTH, height=HEIGHT):
        self.x0, self.x1 = map(float, x_range)
        self.y0, self.y1 = map(float, y_range)
        self.w, self.h = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def px(self, x):
        span = self.x1 - self.x0 or 1.0
        return MARGIN + (x - self.x0) / span * (self.w - 2 * MARGIN)

    def py(self, y):
        span = self.y1 - self.y0 or 1.0
        return self.h - MARGIN - (y - self.y0) / span * (self.h - 2 * MARGIN)

    def rect(self, x_lo, x_hi, y_lo, y_hi, fill, opacity=1.0):
        x, y = self.px(x_lo), self.py(y_hi)
        self.parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{self.px(x_hi) - x:.2f}" '
            f'height="{self.py(y_lo) - y:.2f}" fill="{fill}" '
            f'fill-opacity="{opacity}" stroke="none"/>')

    def polyline(self, xs, ys, stroke, width=1.5, dash=None):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}"
                       for x, y in zip(xs, ys))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width}"{dash_attr}/>')

    def dot(self, x, y, fill, r=2.0):
        self.parts.append(
            f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
            f'r="{r}" fill="{fill}"/>')

    def text(self, x, y, s, size=12, anchor="middle", color="#222"):
        self.parts.append(
            f'<text x="{self.px(x):.2f}" y="{self.py(y):.2f}" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{color}" '
            f'font-family="sans-serif">{_esc(s)}</text>')

    def axes(self, x_label="", y_label=""):
        x0, x1 = self.px(self.x0), self.px(self.x1)
        y0, y1 = self.py(self.y0), self.py(self.y1)
        self.parts.append(
            f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" '
            f'height="{y0 - y1:.2f}" fill="none" stroke="#444"/>')
        for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
            xv = self.x0 + frac * (self.x1 - self.x0)
            yv = self.y0 + frac * (self.y1 - self.y0)
            self.parts.append(
                f'<text x="{self.px(xv):.2f}" y="{y0 + 18:.2f}" font-size="11" '
                f'text-anchor="middle" font-family="sans-serif" '
                f'fill="#444">{xv:.3g}</text>')
            self.parts.append(
                f'<text x="{x0 - 8:.2f}" y="{self.py(yv) + 4:.2f}" font-size="11" '
                f'text-anchor="end" font-family="sans-serif" '
                f'fill="#444">{yv:.3g}</text>')
        if x_label:
            self.parts.append(
                f'<text x="{(x0 + x1) / 2:.2f}" y="{self.h - 12:.2f}" '
                f'font-size="13" text-anchor="middle" '
                f'font-family="sans-serif" fill="#222">{_esc(x_label)}</text>')
        if y_label:
            self.parts.append(
                f'<text x="16" y="{(y0 + y1) / 2:.2f}" font-size="13" '
                f'text-anchor="middle" font-family="sans-serif" fill="#222" '
                f'transform="rotate(-90 16 {(y0 + y1) / 2:.2f})">'
                f'{_esc(y_label)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"])


def region_map_1d(regions, box, title="") -> str:
    """Colored strip of the 1-D critical regions with their labels."""
    cv = _Canvas((box[0][0], box[0][1]), (0.0, 1.0))
    for i, r in enumerate(regions):
        iv = r.inequalities[0]
        cv.rect(iv.lo, iv.hi, 0.15, 0.85, PALETTE[i % len(PALETTE)],
                opacity=0.75)
        cv.text(0.5 * (iv.lo + iv.hi), 0.5, r.label)
    cv.axes(x_label="x0")
    if title:
        cv.text(0.5 * (box[0][0] + box[0][1]), 1.07, title, size=14)
    return cv.render()


def region_map_2d(regions, box, grid: int = 120, title="") -> str:
    """Colored cell map of the 2-D regions, classifying a fine raster by
    region membership (first region whose inequalities hold wins)."""
    (x_lo, x_hi), (y_lo, y_hi) = box
    cv = _Canvas((x_lo, x_hi), (y_lo, y_hi))
    xs = np.linspace(x_lo, x_hi, grid)
    ys = np.linspace(y_lo, y_hi, grid)
    dx = (x_hi - x_lo) / (grid - 1)
    dy = (y_hi - y_lo) / (grid - 1)
    for x in xs:
        for y in ys:
            for i, r in enumerate(regions):
                if all(c.contains([x, y], tol=1e-9) for c in r.inequalities):
                    cv.rect(x - dx / 2, x + dx / 2, y - dy / 2, y + dy / 2,
                            PALETTE[i % len(PALETTE)], opacity=0.75)
                    break
    for i, r in enumerate(regions):
        cx, cy = np.mean(np.asarray(r.samples), axis=0)
        cv.text(cx, cy, r.label)
    cv.axes(x_label="x01", y_label="x02")
    if title:
        cv.text(0.5 * (x_lo + x_hi), y_hi + 0.07 * (y_hi - y_lo), title, size=14)
    return cv.render()


def trajectory_chart(series, title="") -> str:
    """Line chart of named time series: series = {name: (ts, values)}."""
    all_t = np.concatenate([np.asarray(ts) for ts, _ in series.values()])
    all_v = np.concatenate([np.asarray(vs) for _, vs in series.values()])
    pad = 0.05 * (all_v.max() - all_v.min() or 1.0)
    cv = _Canvas((all_t.min(), all_t.max()), (all_v.min() - pad, all_v.max() + pad))
    for i, (name, (ts, vs)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        cv.polyline(np.asarray(ts), np.asarray(vs), color)
        cv.text(ts[-1], vs[-1], name, size=11, anchor="start", color=color)
    cv.axes(x_label="t")
    if title:
        mid = 0.5 * (all_t.min() + all_t.max())
        cv.text(mid, all_v.max() + pad * 0.2, title, size=14)
    return cv.render()
