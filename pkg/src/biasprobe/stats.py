"""Series aggregation and fit diagnostics.

Per-probe gender masses are averaged into one point per axis position, then
summarized by a polynomial least-squares fit: slope, Pearson's r, and a 95%
confidence band for the mean response, all against the normalized axis index.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import t as t_dist

from .errors import DegenerateSeriesError, FitError, InputError
from .scorer import GenderMass
from .templates import ProbeText

__all__ = [
    "MAX_FIT_DEGREE",
    "SeriesPoint",
    "CiPoint",
    "FitResult",
    "aggregate",
    "pearson_r",
    "fit",
    "report_table",
    "render_report",
    "write_series_csv",
    "read_series_csv",
]

#: Numerical conditioning over at most a few dozen points degrades quickly
#: beyond this degree.
MAX_FIT_DEGREE = 5

SERIES_HEADER = ["w_index", "w_value", "mean_female", "mean_male", "n_probes"]


@dataclass(frozen=True)
class SeriesPoint:
    """Averaged gender masses for one axis position."""

    w_index: int
    w_value: str
    mean_female: float
    mean_male: float
    n_probes: int

    def __post_init__(self):
        if self.n_probes < 1:
            raise InputError("a series point needs at least one probe")
        for name in ("mean_female", "mean_male"):
            value = getattr(self, name)
            if not -1e-9 <= value <= 1.0 + 1e-6:
                raise InputError(f"{name}={value!r} outside [0, 1]")
        if self.w_index < 0:
            raise InputError("w_index must be non-negative")


@dataclass(frozen=True)
class CiPoint:
    """95% mean-response interval for both genders at one x position."""

    x: float
    lower_f: float
    upper_f: float
    lower_m: float
    upper_m: float


@dataclass(frozen=True)
class FitResult:
    """Polynomial fit summary for a female/male series pair.

    Coefficients are in ascending order over the normalized index. The slope
    always comes from a separate degree-1 fit so it is comparable across
    degrees. A Pearson value of None marks a degenerate (zero-variance)
    series.
    """

    degree: int
    coeffs_female: tuple[float, ...]
    coeffs_male: tuple[float, ...]
    slope_female: float
    slope_male: float
    pearson_female: Optional[float]
    pearson_male: Optional[float]
    ci_band: tuple[CiPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs_female", tuple(self.coeffs_female))
        object.__setattr__(self, "coeffs_male", tuple(self.coeffs_male))
        object.__setattr__(self, "ci_band", tuple(self.ci_band))
        if self.degree < 1:
            raise InputError("degree must be >= 1")
        for name in ("pearson_female", "pearson_male"):
            value = getattr(self, name)
            if value is not None and not -1.0 <= value <= 1.0:
                raise InputError(f"{name}={value!r} outside [-1, 1]")

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "coeffs_female": list(self.coeffs_female),
            "coeffs_male": list(self.coeffs_male),
            "slope_female": self.slope_female,
            "slope_male": self.slope_male,
            "pearson_female": self.pearson_female,
            "pearson_male": self.pearson_male,
            "ci": [
                {
                    "x": p.x,
                    "lower_f": p.lower_f,
                    "upper_f": p.upper_f,
                    "lower_m": p.lower_m,
                    "upper_m": p.upper_m,
                }
                for p in self.ci_band
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FitResult":
        try:
            return cls(
                degree=int(data["degree"]),
                coeffs_female=tuple(float(c) for c in data["coeffs_female"]),
                coeffs_male=tuple(float(c) for c in data["coeffs_male"]),
                slope_female=float(data["slope_female"]),
                slope_male=float(data["slope_male"]),
                pearson_female=None
                if data["pearson_female"] is None
                else float(data["pearson_female"]),
                pearson_male=None
                if data["pearson_male"] is None
                else float(data["pearson_male"]),
                ci_band=tuple(
                    CiPoint(
                        x=float(p["x"]),
                        lower_f=float(p["lower_f"]),
                        upper_f=float(p["upper_f"]),
                        lower_m=float(p["lower_m"]),
                        upper_m=float(p["upper_m"]),
                    )
                    for p in data["ci"]
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed fit payload: {exc}") from exc


def aggregate(masses: Sequence[tuple[ProbeText, GenderMass]]) -> list[SeriesPoint]:
    """Average per-probe masses into one point per axis position.

    math.fsum keeps the result independent of input order.
    """
    if not masses:
        raise InputError("no masses to aggregate")
    groups: dict[int, tuple[str, list, list]] = {}
    for probe, gm in masses:
        entry = groups.setdefault(probe.w_index, (probe.w_value, [], []))
        if entry[0] != probe.w_value:
            raise InputError(
                f"axis index {probe.w_index} carries two values: "
                f"{entry[0]!r} and {probe.w_value!r}"
            )
        entry[1].append(gm.female)
        entry[2].append(gm.male)
    points = []
    for w_index in sorted(groups):
        w_value, females, males = groups[w_index]
        n = len(females)
        points.append(
            SeriesPoint(
                w_index=w_index,
                w_value=w_value,
                mean_female=math.fsum(females) / n,
                mean_male=math.fsum(males) / n,
                n_probes=n,
            )
        )
    return points


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation; raises on zero variance."""
    if len(xs) != len(ys):
        raise InputError("xs and ys must have equal length")
    n = len(xs)
    if n < 3:
        raise InputError("need at least 3 points")
    # Constancy, not sxx == 0: rounding in the mean can leave a constant
    # series with a nonzero sum of squares.
    if all(x == xs[0] for x in xs):
        raise DegenerateSeriesError("x values have zero variance")
    if all(y == ys[0] for y in ys):
        raise DegenerateSeriesError("y values have zero variance")
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((x - mean_x) ** 2 for x in xs)
    syy = math.fsum((y - mean_y) ** 2 for y in ys)
    sxy = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def _wls(
    design: np.ndarray, weights: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted least squares; returns (beta, fitted, inverse normal matrix)."""
    xtwx = design.T @ (design * weights[:, None])
    if np.linalg.matrix_rank(xtwx) < design.shape[1]:
        raise FitError("design matrix is rank-deficient")
    xtwx_inv = np.linalg.inv(xtwx)
    beta = xtwx_inv @ (design.T @ (weights * y))
    return beta, design @ beta, xtwx_inv


def fit(series: Sequence[SeriesPoint], degree: int = 1) -> FitResult:
    """Least-squares polynomial fit of both gender series on normalized index.

    Points are weighted by n_probes when probe counts differ (weights are
    scaled to mean 1, so equal counts reduce to the plain unweighted fit).
    Zero-variance gender series get pearson=None instead of failing the fit.
    """
    if not 1 <= degree <= MAX_FIT_DEGREE:
        raise FitError(f"degree must lie in [1, {MAX_FIT_DEGREE}]")
    n = len(series)
    if n < degree + 2:
        raise FitError(f"degree {degree} needs at least {degree + 2} points, got {n}")

    idx = np.array([p.w_index for p in series], dtype=float)
    if len(set(idx)) != n:
        raise FitError("duplicate axis positions in series")
    span = idx.max()
    if span <= 0:
        raise FitError("axis positions are constant")
    x = idx / span

    counts = np.array([p.n_probes for p in series], dtype=float)
    weights = counts / counts.mean()
    y_f = np.array([p.mean_female for p in series], dtype=float)
    y_m = np.array([p.mean_male for p in series], dtype=float)

    design = np.vander(x, N=degree + 1, increasing=True)
    beta_f, yhat_f, xtwx_inv = _wls(design, weights, y_f)
    beta_m, yhat_m, _ = _wls(design, weights, y_m)

    # Mean-response band: yhat +- t * s * sqrt(x0' (X'WX)^-1 x0).
    dof = n - (degree + 1)
    t_crit = float(t_dist.ppf(0.975, dof))
    leverage = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", design, xtwx_inv, design), 0.0))
    s_f = math.sqrt(float(np.sum(weights * (y_f - yhat_f) ** 2)) / dof)
    s_m = math.sqrt(float(np.sum(weights * (y_m - yhat_m) ** 2)) / dof)
    half_f = t_crit * s_f * leverage
    half_m = t_crit * s_m * leverage
    ci_band = tuple(
        CiPoint(
            x=float(x[i]),
            lower_f=float(yhat_f[i] - half_f[i]),
            upper_f=float(yhat_f[i] + half_f[i]),
            lower_m=float(yhat_m[i] - half_m[i]),
            upper_m=float(yhat_m[i] + half_m[i]),
        )
        for i in range(n)
    )

    # Slope stays comparable across degrees: always the linear coefficient of
    # a separate degree-1 fit.
    line = np.vander(x, N=2, increasing=True)
    slope_f = float(_wls(line, weights, y_f)[0][1])
    slope_m = float(_wls(line, weights, y_m)[0][1])

    def _maybe_r(ys: np.ndarray) -> Optional[float]:
        try:
            return pearson_r(list(x), list(ys))
        except DegenerateSeriesError:
            return None

    return FitResult(
        degree=degree,
        coeffs_female=tuple(float(b) for b in beta_f),
        coeffs_male=tuple(float(b) for b in beta_m),
        slope_female=slope_f,
        slope_male=slope_m,
        pearson_female=_maybe_r(y_f),
        pearson_male=_maybe_r(y_m),
        ci_band=ci_band,
    )


def _cell(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def report_table(runs: Sequence[tuple[str, FitResult]]) -> list[tuple[str, str, str, str, str]]:
    """Rows of (label, slope_f, r_f, slope_m, r_m), 3-decimal formatted."""
    if not runs:
        raise InputError("no runs to report")
    rows = []
    for label, result in runs:
        rows.append(
            (
                str(label),
                _cell(result.slope_female),
                _cell(result.pearson_female),
                _cell(result.slope_male),
                _cell(result.pearson_male),
            )
        )
    return rows


def render_report(rows: Sequence[tuple[str, str, str, str, str]]) -> str:
    """Fixed-width text rendering of report_table rows."""
    header = ("run", "slope_f", "r_f", "slope_m", "r_m")
    table = [header, *rows]
    widths = [max(len(row[i]) for row in table) for i in range(5)]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def write_series_csv(series: Sequence[SeriesPoint], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SERIES_HEADER)
        for p in series:
            writer.writerow([p.w_index, p.w_value, repr(p.mean_female), repr(p.mean_male), p.n_probes])


def read_series_csv(path: Union[str, Path]) -> list[SeriesPoint]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise InputError(f"cannot read series {path}: {exc}") from exc
    if not rows or rows[0] != SERIES_HEADER:
        raise InputError(f"{path}: expected header {','.join(SERIES_HEADER)}")
    series = []
    for row in rows[1:]:
        if len(row) != 5:
            raise InputError(f"{path}: malformed row {row!r}")
        series.append(
            SeriesPoint(
                w_index=int(row[0]),
                w_value=row[1],
                mean_female=float(row[2]),
                mean_male=float(row[3]),
                n_probes=int(row[4]),
            )
        )
    return series
