"""Aggregation, correlation, and polynomial-fit tests."""

import json
import math
import random

import numpy as np
import pytest

from biasprobe.errors import DegenerateSeriesError, FitError, InputError
from biasprobe.scorer import GenderMass
from biasprobe.stats import (
    MAX_FIT_DEGREE,
    CiPoint,
    FitResult,
    SeriesPoint,
    aggregate,
    fit,
    pearson_r,
    read_series_csv,
    render_report,
    report_table,
    write_series_csv,
)
from biasprobe.templates import MASK, ProbeText


def make_probe(w_index, w_value=None, suffix=""):
    value = w_value if w_value is not None else str(1801 + 10 * w_index)
    return ProbeText(
        text=f"{MASK} lived in {value}{suffix}.",
        w_index=w_index,
        w_value=value,
        verb=None,
        life_stage=None,
        template_id=0,
    )


def make_series(ys_f, ys_m=None, counts=None):
    ys_m = ys_m if ys_m is not None else [1.0 - y for y in ys_f]
    counts = counts if counts is not None else [10] * len(ys_f)
    return [
        SeriesPoint(
            w_index=i,
            w_value=str(i),
            mean_female=f,
            mean_male=m,
            n_probes=c,
        )
        for i, (f, m, c) in enumerate(zip(ys_f, ys_m, counts))
    ]


class TestSeriesPoint:
    def test_validation(self):
        with pytest.raises(InputError):
            SeriesPoint(0, "a", 0.5, 0.5, 0)
        with pytest.raises(InputError):
            SeriesPoint(0, "a", 1.5, 0.5, 1)
        with pytest.raises(InputError):
            SeriesPoint(-1, "a", 0.5, 0.5, 1)


class TestAggregate:
    def test_groups_and_averages(self):
        masses = [
            (make_probe(0, suffix=" a"), GenderMass(0.2, 0.3)),
            (make_probe(0, suffix=" b"), GenderMass(0.4, 0.1)),
            (make_probe(1), GenderMass(0.6, 0.2)),
        ]
        points = aggregate(masses)
        assert len(points) == 2
        assert points[0].n_probes == 2
        assert points[0].mean_female == pytest.approx(0.3, abs=1e-15)
        assert points[0].mean_male == pytest.approx(0.2, abs=1e-15)
        assert points[1].n_probes == 1
        assert points[1].w_value == "1811"

    def test_order_invariance_is_exact(self):
        rng = random.Random(11)
        masses = [
            (make_probe(i % 7, suffix=f" v{j}"), GenderMass(rng.random() / 2, rng.random() / 2))
            for j, i in enumerate(rng.choices(range(7), k=200))
        ]
        baseline = aggregate(masses)
        for _ in range(5):
            rng.shuffle(masses)
            assert aggregate(masses) == baseline

    def test_output_sorted_by_index(self):
        masses = [
            (make_probe(5), GenderMass(0.1, 0.1)),
            (make_probe(2), GenderMass(0.1, 0.1)),
            (make_probe(9), GenderMass(0.1, 0.1)),
        ]
        assert [p.w_index for p in aggregate(masses)] == [2, 5, 9]

    def test_conflicting_value_for_index(self):
        masses = [
            (make_probe(0, w_value="1801"), GenderMass(0.1, 0.1)),
            (make_probe(0, w_value="1901"), GenderMass(0.1, 0.1)),
        ]
        with pytest.raises(InputError):
            aggregate(masses)

    def test_empty(self):
        with pytest.raises(InputError):
            aggregate([])


class TestPearson:
    def test_perfect_correlation(self):
        xs = [0.0, 0.5, 1.0, 1.5]
        assert pearson_r(xs, [2 * x + 1 for x in xs]) == 1.0
        assert pearson_r(xs, [-0.3 * x for x in xs]) == -1.0

    def test_matches_numpy(self):
        rng = random.Random(3)
        xs = [rng.random() for _ in range(50)]
        ys = [x + rng.gauss(0, 0.3) for x in xs]
        expected = float(np.corrcoef(xs, ys)[0, 1])
        assert pearson_r(xs, ys) == pytest.approx(expected, abs=1e-12)

    def test_validation(self):
        with pytest.raises(InputError):
            pearson_r([1, 2], [1, 2])
        with pytest.raises(InputError):
            pearson_r([1, 2, 3], [1, 2])
        with pytest.raises(DegenerateSeriesError):
            pearson_r([1, 1, 1], [1, 2, 3])
        with pytest.raises(DegenerateSeriesError):
            pearson_r([1, 2, 3], [5, 5, 5])

    def test_constant_series_degenerate_despite_mean_rounding(self):
        # fsum([0.4]*6)/6 lands one ulp above 0.4; constancy must still win
        xs = [i / 5 for i in range(6)]
        with pytest.raises(DegenerateSeriesError):
            pearson_r(xs, [0.4] * 6)


class TestFit:
    def test_recovers_line_exactly(self):
        xs = [i / 9 for i in range(10)]
        result = fit(make_series([0.1 + 0.3 * x for x in xs]))
        assert result.coeffs_female == pytest.approx((0.1, 0.3), abs=1e-10)
        assert result.slope_female == pytest.approx(0.3, abs=1e-10)
        assert result.pearson_female == 1.0
        assert result.pearson_male == -1.0
        # noiseless data: the band collapses onto the fitted curve
        for p in result.ci_band:
            assert p.upper_f - p.lower_f < 1e-9

    def test_recovers_quadratic_exactly(self):
        xs = [i / 9 for i in range(10)]
        ys = [0.2 + 0.1 * x - 0.05 * x * x for x in xs]
        result = fit(make_series(ys), degree=2)
        assert result.coeffs_female == pytest.approx((0.2, 0.1, -0.05), abs=1e-10)

    def test_slope_is_always_linear(self):
        xs = [i / 9 for i in range(10)]
        ys = [0.2 + 0.1 * x - 0.05 * x * x for x in xs]
        cubic = fit(make_series(ys), degree=3)
        linear = fit(make_series(ys), degree=1)
        assert cubic.slope_female == pytest.approx(linear.slope_female, abs=1e-12)
        assert cubic.slope_female != pytest.approx(0.1, abs=1e-3)

    def test_weights_match_numpy_polyfit(self):
        rng = random.Random(5)
        ys = [min(1.0, max(0.0, 0.3 + 0.4 * i / 11 + rng.gauss(0, 0.05))) for i in range(12)]
        counts = [rng.randrange(1, 40) for _ in range(12)]
        result = fit(make_series(ys, counts=counts), degree=2)
        x = np.arange(12) / 11
        w = np.array(counts, dtype=float)
        expected = np.polyfit(x, ys, 2, w=np.sqrt(w))[::-1]
        assert result.coeffs_female == pytest.approx(tuple(expected), abs=1e-9)

    def test_affine_invariance(self):
        rng = random.Random(9)
        base = [rng.uniform(0.2, 0.6) for _ in range(15)]
        first = fit(make_series(base))
        a, b = 0.17, 0.4
        shifted = fit(make_series([a + b * y for y in base]))
        assert shifted.slope_female == pytest.approx(b * first.slope_female, rel=1e-9)
        assert shifted.coeffs_female[0] == pytest.approx(
            a + b * first.coeffs_female[0], rel=1e-9
        )
        assert shifted.pearson_female == pytest.approx(first.pearson_female, abs=1e-12)

    def test_residuals_orthogonal_to_design(self):
        rng = random.Random(13)
        ys = [min(1.0, max(0.0, 0.4 + rng.gauss(0, 0.1))) for _ in range(20)]
        result = fit(make_series(ys), degree=3)
        x = np.arange(20) / 19
        residuals = np.array(ys) - np.polyval(result.coeffs_female[::-1], x)
        for j in range(4):
            assert abs(float(np.sum(residuals * x**j))) < 1e-8

    def test_ci_closed_form_at_mean_x(self):
        from scipy.stats import t as t_dist

        rng = random.Random(21)
        n = 21
        ys = [min(1.0, max(0.0, 0.3 + 0.02 * i + rng.gauss(0, 0.04))) for i in range(n)]
        result = fit(make_series(ys), degree=1)
        x = np.arange(n) / (n - 1)
        mid = 10
        assert x[mid] == 0.5
        assert float(np.mean(x)) == pytest.approx(0.5, abs=1e-12)
        yhat = result.coeffs_female[0] + result.coeffs_female[1] * x
        s = math.sqrt(float(np.sum((np.array(ys) - yhat) ** 2)) / (n - 2))
        expected_half = float(t_dist.ppf(0.975, n - 2)) * s / math.sqrt(n)
        band = result.ci_band[mid]
        assert (band.upper_f - band.lower_f) / 2 == pytest.approx(expected_half, abs=1e-9)

    def test_degenerate_series_flagged_not_fatal(self):
        result = fit(make_series([0.5] * 10, ys_m=[0.1 + 0.05 * i for i in range(10)]))
        assert result.pearson_female is None
        assert result.pearson_male == 1.0
        assert result.slope_female == pytest.approx(0.0, abs=1e-12)

    def test_degree_bounds(self):
        series = make_series([0.1 * i for i in range(10)])
        with pytest.raises(FitError):
            fit(series, degree=0)
        with pytest.raises(FitError):
            fit(series, degree=MAX_FIT_DEGREE + 1)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            fit(make_series([0.1, 0.2, 0.3, 0.4]), degree=3)

    def test_duplicate_positions(self):
        series = make_series([0.1, 0.2, 0.3, 0.4])
        clone = series[0]
        with pytest.raises(FitError):
            fit(series[:-1] + [clone])


class TestFitResult:
    def test_dict_round_trip_through_json(self):
        result = fit(make_series([0.1 + 0.05 * i for i in range(10)]), degree=2)
        payload = json.loads(json.dumps(result.to_dict()))
        assert FitResult.from_dict(payload) == result

    def test_round_trip_preserves_none_pearson(self):
        result = fit(make_series([0.5] * 10))
        restored = FitResult.from_dict(result.to_dict())
        assert restored.pearson_female is None

    def test_from_dict_malformed(self):
        with pytest.raises(InputError):
            FitResult.from_dict({"degree": 1})

    def test_validation(self):
        with pytest.raises(InputError):
            FitResult(
                degree=0, coeffs_female=(0.0,), coeffs_male=(0.0,),
                slope_female=0.0, slope_male=0.0,
                pearson_female=None, pearson_male=None, ci_band=(),
            )
        with pytest.raises(InputError):
            FitResult(
                degree=1, coeffs_female=(0.0,), coeffs_male=(0.0,),
                slope_female=0.0, slope_male=0.0,
                pearson_female=1.5, pearson_male=None, ci_band=(),
            )


class TestReport:
    def test_rows_formatted(self):
        result = fit(make_series([0.1 + 0.05 * i for i in range(10)]))
        rows = report_table([("synthetic/date", result)])
        assert rows[0][0] == "synthetic/date"
        assert rows[0][1] == f"{result.slope_female:.3f}"
        assert rows[0][2] == "1.000"
        assert rows[0][4] == "-1.000"

    def test_none_rendered_as_na(self):
        result = fit(make_series([0.5] * 10))
        rows = report_table([("flat", result)])
        assert rows[0][2] == "n/a"

    def test_empty(self):
        with pytest.raises(InputError):
            report_table([])

    def test_render_layout(self):
        result = fit(make_series([0.1 + 0.05 * i for i in range(10)]))
        text = render_report(report_table([("alpha", result), ("a-much-longer-label", result)]))
        lines = text.splitlines()
        assert lines[0].split() == ["run", "slope_f", "r_f", "slope_m", "r_m"]
        assert len(lines) == 3
        # columns align: every r_f cell starts at the same offset
        offset = lines[0].index("r_f")
        assert lines[1][offset:].startswith("1.000")


class TestSeriesCsv:
    def test_round_trip(self, tmp_path):
        series = make_series([0.1 + 0.037 * i for i in range(9)], counts=[3 * i + 1 for i in range(9)])
        path = tmp_path / "series.csv"
        write_series_csv(series, path)
        assert read_series_csv(path) == series

    def test_write_is_byte_stable(self, tmp_path):
        series = make_series([1 / 3, 2 / 7, 0.5])
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        write_series_csv(series, a)
        write_series_csv(series, b)
        assert a.read_bytes() == b.read_bytes()
        assert read_series_csv(a) == series  # repr round-trips floats exactly

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c,d,e\n", encoding="utf-8")
        with pytest.raises(InputError):
            read_series_csv(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("w_index,w_value,mean_female,mean_male,n_probes\n0,a,0.5\n", encoding="utf-8")
        with pytest.raises(InputError):
            read_series_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_series_csv(tmp_path / "missing.csv")
