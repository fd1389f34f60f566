"""Dependency-free SVG rendering of gender-mass series.

Produces a scatter of per-axis-value means, the fitted polynomial curve, and
the shaded 95% confidence band, one layer per gender. Output is a plain SVG
string; element classes (marker, fit, band, xlabel) are stable hooks for
tests and for styling.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .errors import InputError
from .stats import FitResult, SeriesPoint

__all__ = ["render_series_plot"]

FEMALE_COLOR = "#c2185b"
MALE_COLOR = "#1565c0"

_CURVE_SAMPLES = 100


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _polyval(coeffs: Sequence[float], x: float) -> float:
    # Horner over ascending coefficients.
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


class _Frame:
    """Maps normalized-index/value coordinates onto pixel space."""

    def __init__(self, width, height, x_lo, x_hi, y_lo, y_hi):
        self.left, self.right = 56.0, 18.0
        self.top, self.bottom = 30.0, 72.0
        self.width, self.height = width, height
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi

    def px(self, x: float) -> float:
        span = self.x_hi - self.x_lo or 1.0
        return self.left + (x - self.x_lo) / span * (self.width - self.left - self.right)

    def py(self, y: float) -> float:
        span = self.y_hi - self.y_lo or 1.0
        return self.height - self.bottom - (y - self.y_lo) / span * (
            self.height - self.top - self.bottom
        )


def _band_path(frame: _Frame, points: Sequence[tuple[float, float, float]]) -> str:
    upper = [f"{_fmt(frame.px(x))},{_fmt(frame.py(u))}" for x, _, u in points]
    lower = [f"{_fmt(frame.px(x))},{_fmt(frame.py(lo))}" for x, lo, _ in reversed(points)]
    return "M" + " L".join(upper + lower) + " Z"


def _curve_path(frame: _Frame, coeffs: Sequence[float], x_lo: float, x_hi: float) -> str:
    steps = []
    for i in range(_CURVE_SAMPLES + 1):
        x = x_lo + (x_hi - x_lo) * i / _CURVE_SAMPLES
        steps.append(f"{_fmt(frame.px(x))},{_fmt(frame.py(_polyval(coeffs, x)))}")
    return "M" + " L".join(steps)


def render_series_plot(
    series: Sequence[SeriesPoint],
    fit_result: FitResult,
    *,
    title: Optional[str] = None,
    width: int = 720,
    height: int = 460,
) -> str:
    """Render series + fit as a standalone SVG document string.

    A gender whose means are all exactly zero has no data to show (empty
    lexicon column) and its layer is omitted entirely.
    """
    if not series:
        raise InputError("nothing to plot")
    span = max(p.w_index for p in series)
    if span <= 0:
        raise InputError("need at least two axis positions to plot")
    xs = [p.w_index / span for p in series]

    show_f = any(p.mean_female != 0.0 for p in series)
    show_m = any(p.mean_male != 0.0 for p in series)
    if not (show_f or show_m):
        show_f = show_m = True  # all-zero run still gets both flat layers

    ys: list[float] = []
    for p, ci in zip(series, fit_result.ci_band):
        if show_f:
            ys.extend((p.mean_female, ci.lower_f, ci.upper_f))
        if show_m:
            ys.extend((p.mean_male, ci.lower_m, ci.upper_m))
    y_lo = min(0.0, min(ys))
    y_hi = max(ys) or 1.0
    pad = 0.06 * (y_hi - y_lo or 1.0)
    frame = _Frame(width, height, min(xs), max(xs), y_lo - pad, y_hi + pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        "<defs><clipPath id=\"plotclip\">"
        f'<rect x="{_fmt(frame.left)}" y="{_fmt(frame.top)}" '
        f'width="{_fmt(width - frame.left - frame.right)}" '
        f'height="{_fmt(height - frame.top - frame.bottom)}"/>'
        "</clipPath></defs>",
    ]
    if title:
        parts.append(
            f'<text class="title" x="{_fmt(width / 2)}" y="18" text-anchor="middle" '
            f'font-size="13">{escape(title)}</text>'
        )

    # Axes and y ticks.
    x0, x1 = frame.left, width - frame.right
    y0, y1 = height - frame.bottom, frame.top
    parts.append(
        f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y0)}" '
        'stroke="#444" stroke-width="1"/>'
    )
    parts.append(
        f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" '
        'stroke="#444" stroke-width="1"/>'
    )
    for i in range(5):
        value = frame.y_lo + (frame.y_hi - frame.y_lo) * i / 4
        y = frame.py(value)
        parts.append(
            f'<line class="ytick" x1="{_fmt(x0 - 4)}" y1="{_fmt(y)}" x2="{_fmt(x0)}" '
            f'y2="{_fmt(y)}" stroke="#444" stroke-width="1"/>'
        )
        parts.append(
            f'<text class="ylabel" x="{_fmt(x0 - 8)}" y="{_fmt(y + 3)}" text-anchor="end" '
            f'font-size="10">{value:.2f}</text>'
        )

    # X labels, rotated to survive dense axes.
    for p, x in zip(series, xs):
        px = frame.px(x)
        parts.append(
            f'<text class="xlabel" font-size="9" text-anchor="end" '
            f'transform="translate({_fmt(px)},{_fmt(y0 + 10)}) rotate(-55)">'
            f"{escape(p.w_value)}</text>"
        )

    layers = []
    if show_f:
        layers.append(
            (
                "female",
                FEMALE_COLOR,
                [p.mean_female for p in series],
                fit_result.coeffs_female,
                [(c.x, c.lower_f, c.upper_f) for c in fit_result.ci_band],
            )
        )
    if show_m:
        layers.append(
            (
                "male",
                MALE_COLOR,
                [p.mean_male for p in series],
                fit_result.coeffs_male,
                [(c.x, c.lower_m, c.upper_m) for c in fit_result.ci_band],
            )
        )

    parts.append('<g clip-path="url(#plotclip)">')
    for name, color, means, coeffs, band in layers:
        parts.append(
            f'<path class="band band-{name}" d="{_band_path(frame, band)}" '
            f'fill="{color}" fill-opacity="0.15" stroke="none"/>'
        )
    for name, color, means, coeffs, band in layers:
        parts.append(
            f'<path class="fit fit-{name}" d="{_curve_path(frame, coeffs, min(xs), max(xs))}" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
    for name, color, means, coeffs, band in layers:
        for x, mean in zip(xs, means):
            parts.append(
                f'<circle class="marker marker-{name}" cx="{_fmt(frame.px(x))}" '
                f'cy="{_fmt(frame.py(mean))}" r="3" fill="{color}"/>'
            )
    parts.append("</g>")

    # Legend in the top-right corner.
    lx = width - frame.right - 120
    for i, (name, color, *_rest) in enumerate(layers):
        ly = frame.top + 14 + 16 * i
        parts.append(
            f'<circle class="legend-dot" cx="{_fmt(lx)}" cy="{_fmt(ly - 3)}" r="4" fill="{color}"/>'
        )
        parts.append(
            f'<text class="legend" x="{_fmt(lx + 10)}" y="{_fmt(ly)}" font-size="11">'
            f"mean {name} mass</text>"
        )

    parts.append("</svg>")
    return "\n".join(parts)
