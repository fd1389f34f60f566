"""SVG rendering tests: structure, layers, and gender omission."""

import xml.etree.ElementTree as ET

import pytest

from biasprobe.errors import InputError
from biasprobe.stats import SeriesPoint, fit
from biasprobe.svgplot import FEMALE_COLOR, MALE_COLOR, render_series_plot


def make_series(ys_f, ys_m=None):
    ys_m = ys_m if ys_m is not None else [1.0 - y for y in ys_f]
    return [
        SeriesPoint(w_index=i, w_value=str(1801 + 10 * i), mean_female=f, mean_male=m, n_probes=36)
        for i, (f, m) in enumerate(zip(ys_f, ys_m))
    ]


def render(series, degree=1, **kwargs):
    return render_series_plot(series, fit(series, degree=degree), **kwargs)


class TestRenderSeriesPlot:
    def test_full_document(self):
        series = make_series([0.25 + 0.02 * i for i in range(10)])
        svg = render(series, title="synthetic/date (degree 1)")
        root = ET.fromstring(svg)  # well-formed XML
        assert root.tag.endswith("svg")
        assert root.get("width") == "720"
        assert root.get("viewBox") == "0 0 720 460"
        assert svg.count('class="marker marker-female"') == 10
        assert svg.count('class="marker marker-male"') == 10
        assert svg.count('class="fit fit-female"') == 1
        assert svg.count('class="fit fit-male"') == 1
        assert svg.count('class="band band-female"') == 1
        assert svg.count('class="band band-male"') == 1
        assert svg.count('class="xlabel"') == 10
        assert "synthetic/date (degree 1)" in svg
        assert 'id="plotclip"' in svg
        assert FEMALE_COLOR in svg and MALE_COLOR in svg

    def test_custom_size(self):
        series = make_series([0.2, 0.3, 0.4, 0.5])
        root = ET.fromstring(render(series, width=400, height=300))
        assert root.get("width") == "400"
        assert root.get("height") == "300"

    def test_zero_mass_gender_omitted(self):
        series = make_series([0.0] * 8, ys_m=[0.3 + 0.02 * i for i in range(8)])
        svg = render(series)
        assert 'class="marker marker-female"' not in svg
        assert 'class="fit fit-female"' not in svg
        assert 'class="band band-female"' not in svg
        assert svg.count('class="marker marker-male"') == 8

    def test_all_zero_run_keeps_both_layers(self):
        series = make_series([0.0] * 8, ys_m=[0.0] * 8)
        svg = render(series)
        assert svg.count('class="marker marker-female"') == 8
        assert svg.count('class="marker marker-male"') == 8

    def test_no_title_no_text(self):
        series = make_series([0.2, 0.3, 0.4, 0.5])
        assert 'class="title"' not in render(series)

    def test_empty_series(self):
        series = make_series([0.2, 0.3, 0.4, 0.5])
        result = fit(series)
        with pytest.raises(InputError):
            render_series_plot([], result)

    def test_single_position_rejected(self):
        series = make_series([0.2, 0.3, 0.4, 0.5])
        result = fit(series)
        with pytest.raises(InputError):
            render_series_plot(series[:1], result)

    def test_deterministic(self):
        series = make_series([0.25 + 0.02 * i for i in range(10)])
        assert render(series) == render(series)
