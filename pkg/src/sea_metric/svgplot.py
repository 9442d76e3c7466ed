"""Minimal deterministic SVG rendering: line charts and heatmap panels.

Hand-rolled so rerunning a command writes byte-identical documents (no
library metadata, no timestamps). Heatmap cells are quantized to
`QUANT_LEVELS` palette bins and merged run-length per row, which keeps a
15-panel document small without rasterizing.
"""

from __future__ import annotations

import numpy as np

__all__ = ["line_chart", "heatmap_panels", "matrix_chart",
           "DIVERGING_STOPS", "QUANT_LEVELS", "SERIES_COLORS"]

# 3-stop diverging palette anchored at the score's zero: low -> white -> high.
DIVERGING_STOPS = ((33, 102, 172), (247, 247, 247), (178, 24, 43))
QUANT_LEVELS = 64
SERIES_COLORS = ("#1b6ca8", "#c0392b", "#27843c", "#8e44ad", "#b07d10", "#16a2b8")

_FONT = 'font-family="Helvetica,Arial,sans-serif"'


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _lerp_color(a, b, t: float) -> tuple[int, int, int]:
    return tuple(int(round(a[i] + (b[i] - a[i]) * t)) for i in range(3))


def _diverging(t: float) -> tuple[int, int, int]:
    """Map t in [0, 1] (0.5 = center) onto the 3-stop palette."""
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        return _lerp_color(DIVERGING_STOPS[0], DIVERGING_STOPS[1], t * 2.0)
    return _lerp_color(DIVERGING_STOPS[1], DIVERGING_STOPS[2], (t - 0.5) * 2.0)


def _hex(rgb: tuple[int, int, int]) -> str:
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _quantize(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    t = (np.asarray(values, dtype=float) - lo) / (hi - lo)
    bins = np.clip((t * QUANT_LEVELS).astype(int), 0, QUANT_LEVELS - 1)
    return bins


_BIN_COLORS = [_hex(_diverging((i + 0.5) / QUANT_LEVELS)) for i in range(QUANT_LEVELS)]


def _svg_open(width: float, height: float) -> list[str]:
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
            f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
            f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>']


def _text(x, y, s, size=11, anchor="middle", extra="") -> str:
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" {_FONT} font-size="{size}" '
            f'text-anchor="{anchor}"{extra}>{s}</text>')


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(series, x_label: str, y_label: str,
               y_range: tuple[float, float] | None = None,
               title: str = "", width: float = 640.0, height: float = 440.0) -> str:
    """One polyline per (label, x, y) triple, with axes and a legend."""
    if not series:
        raise ValueError("no series to plot")
    margin_l, margin_r, margin_t, margin_b = 62.0, 20.0, 34.0, 48.0
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    x_lo = min(float(np.min(x)) for _, x, _ in series)
    x_hi = max(float(np.max(x)) for _, x, _ in series)
    if y_range is None:
        y_lo = min(float(np.min(y)) for _, _, y in series)
        y_hi = max(float(np.max(y)) for _, _, y in series)
    else:
        y_lo, y_hi = y_range

    def sx(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return margin_t + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = _svg_open(width, height)
    if title:
        out.append(_text(width / 2, 20, title, size=13))
    out.append(f'<rect x="{_fmt(margin_l)}" y="{_fmt(margin_t)}" width="{_fmt(plot_w)}" '
               f'height="{_fmt(plot_h)}" fill="none" stroke="#444444"/>')
    for tx in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{_fmt(sx(tx))}" y1="{_fmt(margin_t + plot_h)}" '
                   f'x2="{_fmt(sx(tx))}" y2="{_fmt(margin_t + plot_h + 5)}" stroke="#444444"/>')
        out.append(_text(sx(tx), margin_t + plot_h + 18, f"{tx:.2f}", size=10))
    for ty in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{_fmt(margin_l - 5)}" y1="{_fmt(sy(ty))}" '
                   f'x2="{_fmt(margin_l)}" y2="{_fmt(sy(ty))}" stroke="#444444"/>')
        out.append(_text(margin_l - 9, sy(ty) + 3.5, f"{ty:.2f}", size=10, anchor="end"))
    if y_lo < 0.0 < y_hi:
        out.append(f'<line x1="{_fmt(margin_l)}" y1="{_fmt(sy(0.0))}" '
                   f'x2="{_fmt(margin_l + plot_w)}" y2="{_fmt(sy(0.0))}" '
                   f'stroke="#bbbbbb" stroke-dasharray="4 3"/>')
    out.append(_text(margin_l + plot_w / 2, height - 12, x_label, size=12))
    out.append(_text(16, margin_t + plot_h / 2, y_label, size=12,
                     extra=f' transform="rotate(-90 16 {_fmt(margin_t + plot_h / 2)})"'))
    for idx, (label, x, y) in enumerate(series):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        pts = " ".join(f"{_fmt(sx(float(xi)))},{_fmt(sy(float(yi)))}"
                       for xi, yi in zip(np.asarray(x), np.asarray(y)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        ly = margin_t + 12 + 16 * idx
        lx = margin_l + plot_w - 110
        out.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly)}" x2="{_fmt(lx + 22)}" '
                   f'y2="{_fmt(ly)}" stroke="{color}" stroke-width="1.6"/>')
        out.append(_text(lx + 28, ly + 3.5, label, size=11, anchor="start"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _panel_rects(grid: np.ndarray, x0: float, y0: float, w: float, h: float,
                 lo: float, hi: float) -> list[str]:
    """Run-length merged cell rectangles for one panel.

    grid[i, j]: i indexes the y axis bottom-up, j the x axis left-right.
    """
    n_rows, n_cols = grid.shape
    bins = _quantize(grid, lo, hi)
    cell_w = w / n_cols
    cell_h = h / n_rows
    out = []
    for i in range(n_rows):
        y = y0 + h - (i + 1) * cell_h
        j = 0
        while j < n_cols:
            j2 = j
            b = bins[i, j]
            while j2 + 1 < n_cols and bins[i, j2 + 1] == b:
                j2 += 1
            out.append(f'<rect x="{_fmt(x0 + j * cell_w)}" y="{_fmt(y)}" '
                       f'width="{_fmt((j2 - j + 1) * cell_w)}" height="{_fmt(cell_h + 0.05)}" '
                       f'fill="{_BIN_COLORS[b]}"/>')
            j = j2 + 1
    return out


def heatmap_panels(panels, x_label: str, y_label: str,
                   value_range: tuple[float, float] = (-1.0, 1.0),
                   title: str = "", panel_size: float = 150.0,
                   x_extent: tuple[float, float] = (0.0, 1.0),
                   y_extent: tuple[float, float] = (0.0, 1.0)) -> str:
    """Grid of heatmap panels (list of rows of (label, grid)) sharing one colorbar."""
    if not panels or not panels[0]:
        raise ValueError("no panels to plot")
    n_rows = len(panels)
    n_cols = len(panels[0])
    gap = 30.0
    margin_l, margin_t = 56.0, 46.0
    bar_w, bar_gap = 16.0, 36.0
    width = margin_l + n_cols * (panel_size + gap) + bar_gap + bar_w + 52.0
    height = margin_t + n_rows * (panel_size + gap) + 22.0
    lo, hi = value_range
    out = _svg_open(width, height)
    if title:
        out.append(_text(width / 2, 22, title, size=14))
    for r, row in enumerate(panels):
        for c, (label, grid) in enumerate(row):
            x0 = margin_l + c * (panel_size + gap)
            y0 = margin_t + r * (panel_size + gap)
            out.extend(_panel_rects(np.asarray(grid), x0, y0, panel_size, panel_size, lo, hi))
            out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(panel_size)}" '
                       f'height="{_fmt(panel_size)}" fill="none" stroke="#444444"/>')
            out.append(_text(x0 + panel_size / 2, y0 - 6, label, size=11))
            if r == n_rows - 1:
                out.append(_text(x0 + panel_size / 2, y0 + panel_size + 16, x_label, size=11))
                out.append(_text(x0, y0 + panel_size + 16, f"{x_extent[0]:g}", size=9))
                out.append(_text(x0 + panel_size, y0 + panel_size + 16, f"{x_extent[1]:g}", size=9))
            if c == 0:
                out.append(_text(x0 - 30, y0 + panel_size / 2, y_label, size=11,
                                 extra=f' transform="rotate(-90 {_fmt(x0 - 30)} {_fmt(y0 + panel_size / 2)})"'))
                out.append(_text(x0 - 8, y0 + panel_size, f"{y_extent[0]:g}", size=9, anchor="end"))
                out.append(_text(x0 - 8, y0 + 8, f"{y_extent[1]:g}", size=9, anchor="end"))
    # shared colorbar
    bar_x = margin_l + n_cols * (panel_size + gap) + bar_gap - gap
    bar_y = margin_t
    bar_h = n_rows * (panel_size + gap) - gap
    seg = bar_h / QUANT_LEVELS
    for i in range(QUANT_LEVELS):
        y = bar_y + bar_h - (i + 1) * seg
        out.append(f'<rect x="{_fmt(bar_x)}" y="{_fmt(y)}" width="{_fmt(bar_w)}" '
                   f'height="{_fmt(seg + 0.05)}" fill="{_BIN_COLORS[i]}"/>')
    out.append(f'<rect x="{_fmt(bar_x)}" y="{_fmt(bar_y)}" width="{_fmt(bar_w)}" '
               f'height="{_fmt(bar_h)}" fill="none" stroke="#444444"/>')
    for frac, val in ((0.0, lo), (0.5, (lo + hi) / 2.0), (1.0, hi)):
        y = bar_y + bar_h * (1.0 - frac)
        out.append(f'<line x1="{_fmt(bar_x + bar_w)}" y1="{_fmt(y)}" '
                   f'x2="{_fmt(bar_x + bar_w + 4)}" y2="{_fmt(y)}" stroke="#444444"/>')
        out.append(_text(bar_x + bar_w + 8, y + 3.5, f"{val:g}", size=10, anchor="start"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def matrix_chart(row_labels, col_labels, values, title: str = "",
                 value_range: tuple[float, float] | None = None,
                 cell: float = 64.0) -> str:
    """Annotated matrix heatmap (e.g. per-category metric tables)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no values to plot")
    if value_range is None:
        value_range = (float(values.min()), float(values.max()) or 1.0)
    lo, hi = value_range
    if hi <= lo:
        hi = lo + 1.0
    margin_l, margin_t = 120.0, 54.0
    width = margin_l + cell * len(col_labels) + 24.0
    height = margin_t + cell * len(row_labels) + 24.0
    out = _svg_open(width, height)
    if title:
        out.append(_text(width / 2, 22, title, size=13))
    for j, cl in enumerate(col_labels):
        out.append(_text(margin_l + cell * (j + 0.5), margin_t - 8, str(cl), size=11))
    for i, rl in enumerate(row_labels):
        out.append(_text(margin_l - 8, margin_t + cell * (i + 0.62), str(rl),
                         size=11, anchor="end"))
        for j in range(len(col_labels)):
            val = float(values[i, j])
            t = (val - lo) / (hi - lo)
            color = _hex(_diverging(t))
            x, y = margin_l + cell * j, margin_t + cell * i
            out.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell)}" '
                       f'height="{_fmt(cell)}" fill="{color}" stroke="#ffffff"/>')
            out.append(_text(x + cell / 2, y + cell / 2 + 4, f"{val:.3f}", size=10))
    out.append("</svg>")
    return "\n".join(out) + "\n"
