"""Self-contained SVG line charts: axes, optional log-y scale, legend.

Deliberately dependency-free; output is deterministic for fixed input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")

MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 50


@dataclass(frozen=True)
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]


def line_chart(
    series: Sequence[Series],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_y: bool = False,
    width: int = 760,
    height: int = 480,
) -> str:
    """Render the series as an SVG document string."""
    points = []
    for s in series:
        for x, y in zip(s.xs, s.ys):
            if math.isfinite(x) and math.isfinite(y) and (not log_y or y > 0):
                points.append((x, y))
    if not points:
        raise ValueError("no drawable points")

    xs = [p[0] for p in points]
    ys = [math.log10(p[1]) if log_y else p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    plot_w = width - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = height - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>'
        )

    # Axes frame
    out.append(
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333" stroke-width="1"/>'
    )

    for y_val, label in _y_ticks(y_lo, y_hi, log_y):
        yp = py(y_val)
        out.append(
            f'<line x1="{MARGIN_LEFT}" y1="{yp:.2f}" x2="{MARGIN_LEFT + plot_w}" y2="{yp:.2f}" '
            f'stroke="#ddd" stroke-width="0.5"/>'
        )
        out.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{yp + 4:.2f}" text-anchor="end">{label}</text>'
        )
    for x_val in _linear_ticks(x_lo, x_hi):
        xp = px(x_val)
        out.append(
            f'<line x1="{xp:.2f}" y1="{MARGIN_TOP + plot_h}" x2="{xp:.2f}" y2="{MARGIN_TOP + plot_h + 4}" '
            f'stroke="#333" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{xp:.2f}" y="{MARGIN_TOP + plot_h + 18}" text-anchor="middle">{x_val:g}</text>'
        )

    if x_label:
        out.append(
            f'<text x="{MARGIN_LEFT + plot_w / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(x_label)}</text>'
        )
    if y_label:
        yc = MARGIN_TOP + plot_h / 2
        out.append(
            f'<text x="16" y="{yc:.1f}" text-anchor="middle" transform="rotate(-90 16 {yc:.1f})">{_esc(y_label)}</text>'
        )

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = []
        for x, y in zip(s.xs, s.ys):
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if log_y:
                if y <= 0:
                    continue
                y = math.log10(y)
            coords.append(f"{px(x):.2f},{py(y):.2f}")
        if coords:
            out.append(
                f'<polyline points="{" ".join(coords)}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        ly = MARGIN_TOP + 14 + 16 * i
        lx = MARGIN_LEFT + plot_w - 150
        out.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{lx + 28}" y="{ly}">{_esc(s.label)}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_chart(path, series: Sequence[Series], **kwargs) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(line_chart(series, **kwargs))


def _linear_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _y_ticks(lo: float, hi: float, log_y: bool) -> list[tuple[float, str]]:
    if log_y:
        lo_exp = math.floor(lo)
        hi_exp = math.ceil(hi)
        span = hi_exp - lo_exp
        stride = max(1, span // 6)
        exps = list(range(lo_exp, hi_exp + 1, stride))
        return [(float(e), f"1e{e:d}") for e in exps if lo <= e <= hi] or [(lo, f"1e{lo:.0f}")]
    return [(v, f"{v:.4g}") for v in _linear_ticks(lo, hi)]


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
