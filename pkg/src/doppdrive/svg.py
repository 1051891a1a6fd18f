"""Minimal SVG rendering: bird's-eye scatter plots and metric bar charts.

Written by hand so the output is deterministic and every point, box and bar
is one element with a class attribute that tests can count.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

DYNAMIC_COLOR = "#1f77b4"  # blue
STATIC_COLOR = "#ff7f0e"  # orange
BOX_COLORS = {"detection": "#2ca02c", "truth": "#444444"}
BAR_COLOR = "#4c72b0"


def _f(x: float) -> str:
    return f"{x:.2f}"


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">'
    )
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def _nice_step(span: float, target: int = 5) -> float:
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if m * mag >= raw:
            return m * mag
    return 10 * mag


def bev_svg(
    xy,
    dynamic,
    boxes=(),
    *,
    size: int = 600,
    margin: int = 40,
    extent: tuple | None = None,
    title: str = "",
) -> str:
    """Bird's-eye scatter in radar coordinates (x right, y up the page).

    ``dynamic`` marks points drawn blue; the rest are orange. ``boxes`` is a
    sequence of ``(corners (4, 2), kind)`` with kind ``"detection"`` or
    ``"truth"``. ``extent`` is ``(xmin, xmax, ymin, ymax)``; by default it
    covers every point and box with equal axis scales.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    dynamic = np.asarray(dynamic, dtype=bool).reshape(xy.shape[0])
    boxes = [(np.asarray(c, dtype=float).reshape(4, 2), kind) for c, kind in boxes]
    if extent is None:
        pts = np.vstack([xy] + [c for c, _ in boxes]) if (len(xy) or boxes) else np.zeros((0, 2))
        if len(pts):
            xmax = max(10.0, float(np.abs(pts[:, 0]).max()) * 1.05)
            ymax = max(10.0, float(pts[:, 1].max()) * 1.05)
            ymin = min(0.0, float(pts[:, 1].min()) * 1.05)
        else:
            xmax, ymin, ymax = 25.0, 0.0, 50.0
        half = max(xmax, 0.5 * (ymax - ymin))
        extent = (-half, half, ymin, ymin + 2 * half)
    x0, x1, y0, y1 = (float(e) for e in extent)
    scale = (size - 2 * margin) / max(x1 - x0, y1 - y0)

    def px(x):
        return margin + (x - x0) * scale

    def py(y):
        return size - margin - (y - y0) * scale

    body = ['<g class="axes" stroke="black" stroke-width="1">']
    body.append(f'<line x1="{_f(px(x0))}" y1="{_f(py(y0))}" x2="{_f(px(x1))}" y2="{_f(py(y0))}"/>')
    body.append(f'<line x1="{_f(px(x0))}" y1="{_f(py(y0))}" x2="{_f(px(x0))}" y2="{_f(py(y1))}"/>')
    body.append("</g>")
    step = _nice_step(max(x1 - x0, y1 - y0))
    ticks = ['<g class="ticks" fill="black">']
    for t in np.arange(math.ceil(x0 / step) * step, x1 + 1e-9, step):
        ticks.append(f'<text x="{_f(px(t))}" y="{_f(py(y0) + 14)}" text-anchor="middle">{t:g}</text>')
    for t in np.arange(math.ceil(y0 / step) * step, y1 + 1e-9, step):
        ticks.append(f'<text x="{_f(px(x0) - 4)}" y="{_f(py(t) + 4)}" text-anchor="end">{t:g}</text>')
    ticks.append("</g>")
    body += ticks
    body.append(f'<text x="{_f(size / 2)}" y="{size - 6}" text-anchor="middle">x [m]</text>')
    body.append(f'<text x="12" y="{_f(size / 2)}" transform="rotate(-90 12 {_f(size / 2)})" text-anchor="middle">y [m]</text>')
    if title:
        body.append(f'<text x="{_f(size / 2)}" y="20" text-anchor="middle">{escape(title)}</text>')

    body.append('<g class="points">')
    for (x, y), dyn in zip(xy.tolist(), dynamic.tolist()):
        cls, color = ("dynamic", DYNAMIC_COLOR) if dyn else ("static", STATIC_COLOR)
        body.append(f'<circle class="point {cls}" cx="{_f(px(x))}" cy="{_f(py(y))}" r="1.8" fill="{color}"/>')
    body.append("</g>")
    body.append('<g class="boxes" fill="none" stroke-width="1.2">')
    for corners, kind in boxes:
        pts = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in corners.tolist())
        body.append(f'<polygon class="box {kind}" points="{pts}" stroke="{BOX_COLORS.get(kind, "black")}"/>')
    body.append("</g>")
    return _doc(size, size, body)


def bar_charts_svg(rows, *, width: int = 640, chart_height: int = 260, margin: int = 50) -> str:
    """One bar chart per metric from ``(metric, bin, value)`` rows, stacked vertically.

    Metrics keep their first-appearance order and bars their row order.
    Non-finite values get a label but no bar.
    """
    charts: dict[str, list] = {}
    for metric, bin_, value in rows:
        charts.setdefault(metric, []).append((bin_, float(value)))
    height = max(1, len(charts)) * chart_height
    body = []
    for c, (metric, bars) in enumerate(charts.items()):
        top = c * chart_height
        base = top + chart_height - margin
        plot_h = chart_height - margin - 30
        vals = [v for _, v in bars if math.isfinite(v)]
        vmax = max([abs(v) for v in vals] + [1e-12])
        body.append(f'<g class="chart" data-metric="{escape(metric)}">')
        body.append(f'<text x="{width / 2:.0f}" y="{top + 18}" text-anchor="middle">{escape(metric)}</text>')
        body.append(f'<line class="axis" x1="{margin}" y1="{base}" x2="{width - 10}" y2="{base}" stroke="black"/>')
        body.append(f'<line class="axis" x1="{margin}" y1="{base}" x2="{margin}" y2="{base - plot_h}" stroke="black"/>')
        body.append(f'<text x="{margin - 4}" y="{base - plot_h + 4}" text-anchor="end">{vmax:.3g}</text>')
        slot = (width - 10 - margin) / max(1, len(bars))
        for j, (bin_, v) in enumerate(bars):
            x = margin + j * slot + 0.15 * slot
            w = 0.7 * slot
            if math.isfinite(v):
                h = plot_h * abs(v) / vmax
                y = base - h if v >= 0 else base
                body.append(f'<rect class="bar" x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{BAR_COLOR}">'
                            f"<title>{escape(str(bin_))}: {v:.6g}</title></rect>")
                label = f"{v:.3g}"
            else:
                label = "n/a"
            body.append(f'<text x="{_f(x + w / 2)}" y="{base + 14}" text-anchor="middle">{escape(str(bin_))}</text>')
            body.append(f'<text x="{_f(x + w / 2)}" y="{base - plot_h - 2 if not math.isfinite(v) else _f(base - plot_h * abs(v) / vmax - 3)}" '
                        f'text-anchor="middle">{label}</text>')
        body.append("</g>")
    return _doc(width, height, body)
