"""Minimal deterministic SVG line plots for sweep curves.

No plotting dependency: the output is a flat vector file with axes, ticks,
one polyline per labeled series, and a legend. Byte-identical output for
identical inputs (fixed palette, fixed float formatting, no timestamps).
"""

from __future__ import annotations

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 62, 150, 34, 46


def _fmt(v: float) -> str:
    return "%.6g" % v


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return [float(t) for t in raw]


def curves_svg(title: str, xlabel: str, ylabel: str,
               series: dict[str, tuple[np.ndarray, np.ndarray]],
               y_range: tuple[float, float] | None = None) -> str:
    """Render labeled (x, y) polylines into an SVG document string."""
    xs_all = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys_all = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_range is not None:
        y_lo, y_hi = y_range
    else:
        y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
        pad = 0.05 * (y_hi - y_lo or 1.0)
        y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (WIDTH, HEIGHT, WIDTH, HEIGHT),
        '<rect width="%d" height="%d" fill="white"/>' % (WIDTH, HEIGHT),
        '<text x="%d" y="20" font-family="sans-serif" font-size="14" '
        'text-anchor="middle">%s</text>' % (MARGIN_L + plot_w // 2, title),
    ]
    axis = 'stroke="black" stroke-width="1"'
    out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
               % (_fmt(MARGIN_L), _fmt(MARGIN_T + plot_h), _fmt(MARGIN_L + plot_w),
                  _fmt(MARGIN_T + plot_h), axis))
    out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
               % (_fmt(MARGIN_L), _fmt(MARGIN_T), _fmt(MARGIN_L),
                  _fmt(MARGIN_T + plot_h), axis))
    for t in _ticks(x_lo, x_hi):
        out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
                   % (_fmt(sx(t)), _fmt(MARGIN_T + plot_h),
                      _fmt(sx(t)), _fmt(MARGIN_T + plot_h + 4), axis))
        out.append('<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                   'text-anchor="middle">%s</text>'
                   % (_fmt(sx(t)), _fmt(MARGIN_T + plot_h + 17), _fmt(t)))
    for t in _ticks(y_lo, y_hi):
        out.append('<line x1="%s" y1="%s" x2="%s" y2="%s" %s/>'
                   % (_fmt(MARGIN_L - 4), _fmt(sy(t)), _fmt(MARGIN_L), _fmt(sy(t)), axis))
        out.append('<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                   'text-anchor="end">%s</text>'
                   % (_fmt(MARGIN_L - 7), _fmt(sy(t) + 4), _fmt(t)))
    out.append('<text x="%d" y="%d" font-family="sans-serif" font-size="12" '
               'text-anchor="middle">%s</text>'
               % (MARGIN_L + plot_w // 2, HEIGHT - 8, xlabel))
    out.append('<text x="14" y="%d" font-family="sans-serif" font-size="12" '
               'text-anchor="middle" transform="rotate(-90 14 %d)">%s</text>'
               % (MARGIN_T + plot_h // 2, MARGIN_T + plot_h // 2, ylabel))

    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join("%s,%s" % (_fmt(sx(float(x))), _fmt(sy(float(y))))
                          for x, y in zip(xs, ys))
        out.append('<polyline fill="none" stroke="%s" stroke-width="2" '
                   'points="%s"/>' % (color, points))
        ly = MARGIN_T + 14 + 18 * i
        lx = MARGIN_L + plot_w + 12
        out.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="%s" '
                   'stroke-width="2"/>' % (lx, ly - 4, lx + 22, ly - 4, color))
        out.append('<text x="%d" y="%d" font-family="sans-serif" '
                   'font-size="11">%s</text>' % (lx + 27, ly, label))
    out.append("</svg>")
    return "\n".join(out) + "\n"
