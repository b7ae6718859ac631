#!/usr/bin/env python3
"""
Unit tests for normal_form module
"""

import pytest
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

# Add app directory to path
app_dir = Path(__file__).parent.parent.parent / "app"
sys.path.insert(0, str(app_dir))

import normal_form
from errors import MonodromyMismatch, ResidualExceeded, VerificationFailed
from map_zoo import get_entry
from normal_form import NormalFormReport, build_normal_form, verify_normal_form
from region import Grid

TOL = 1e-3


@pytest.fixture(scope="module")
def pow2_chart():
    planar_map = get_entry("pow2").map
    grid = Grid.around(0j, 0.7, 0.02, planar_map.domain)
    return build_normal_form(planar_map, 0j, grid, TOL, radius=0.25)


@pytest.mark.unit
class TestBuildNormalForm:
    """Test chart construction"""

    def test_order_matches_degree(self, pow2_chart):
        assert pow2_chart.k == 2
        assert pow2_chart.degree == 2
        assert pow2_chart.orientation == 1
        assert pow2_chart.deck_generator == pytest.approx(-1 + 0j)

    def test_rings_are_consistent(self, pow2_chart):
        assert pow2_chart.rings
        assert all(ring.consistent for ring in pow2_chart.rings)
        assert all(ring.winding == 2 for ring in pow2_chart.rings)

    def test_cell_residual_within_tol(self, pow2_chart):
        assert pow2_chart.residual <= TOL
        assert pow2_chart.injective

    def test_center_maps_to_zero(self, pow2_chart):
        assert pow2_chart.psi(0j)[0] == pytest.approx(0j, abs=0.05)

    def test_compose_reproduces_map(self, pow2_chart, pow2_map):
        w = np.array([0.2 + 0.1j, -0.15 + 0.3j, 0.05 - 0.35j])
        assert np.abs(pow2_chart.compose(w) - pow2_map.evaluate_array(w)).max() < 5 * TOL

    def test_psi_is_a_square_root_chart(self, pow2_chart):
        # for z^2 the chart is +-z/sqrt(r)
        w = np.array([0.1 + 0.2j, -0.3 + 0.05j])
        psi = pow2_chart.psi(w)
        assert np.allclose(np.abs(psi), np.abs(w) / 0.5, atol=0.01)

    def test_psi_outside_region_is_nan(self, pow2_chart):
        assert np.isnan(pow2_chart.psi(0.69 + 0.69j)[0])

    def test_regular_point_has_order_one(self, pow2_map):
        grid = Grid.around(0.5 + 0j, 0.3, 0.01, pow2_map.domain)
        chart = build_normal_form(pow2_map, 0.5 + 0j, grid, TOL, radius=0.1)
        assert chart.k == 1

    def test_orientation_reversing_map(self):
        planar_map = get_entry("conj-pow2").map
        grid = Grid.around(0j, 0.7, 0.02, planar_map.domain)
        chart = build_normal_form(planar_map, 0j, grid, TOL, radius=0.25)
        assert chart.degree == -2
        assert chart.orientation == -1
        assert chart.k == 2

    def test_tight_tolerance_raises(self, pow2_map):
        grid = Grid.around(0j, 0.7, 0.02, pow2_map.domain)
        with pytest.raises(ResidualExceeded):
            build_normal_form(pow2_map, 0j, grid, -1.0, radius=0.25)

    def test_to_dict_with_table(self, pow2_chart):
        data = pow2_chart.to_dict(include_table=True)
        assert data["k"] == 2
        assert len(data["table"]["cells"]) == len(data["table"]["psi"])
        assert "table" not in pow2_chart.to_dict()


@pytest.mark.unit
class TestVerifyNormalForm:
    """Test off-grid verification"""

    def test_pow2_verification_passes(self, pow2_chart):
        report = verify_normal_form(pow2_chart, probes=400, tol=0.01)
        assert report.passed
        assert report.probes == 400
        assert report.evaluated > 0

    def test_verification_is_seeded(self, pow2_chart):
        first = verify_normal_form(pow2_chart, probes=200, seed=5)
        second = verify_normal_form(pow2_chart, probes=200, seed=5)
        assert first.to_dict() == second.to_dict()

    def test_report_flags(self):
        report = NormalFormReport(
            probes=10,
            evaluated=10,
            max_residual=0.5,
            mean_residual=0.1,
            tolerance=0.01,
            injectivity_margin=1.0,
            injective=True,
            boundary_deviation=0.0,
            boundary_tolerance=0.1,
        )
        assert not report.within_tolerance
        assert not report.passed
        assert report.to_dict()["boundary_ok"] is True


@pytest.mark.unit
class TestChartInvariants:
    """Test the algebraic and metric properties of a built chart"""

    def _cells(self, chart):
        rows, cols = np.nonzero(~np.isnan(chart.table))
        keep = (rows != chart.nd.center_cell[0]) | (cols != chart.nd.center_cell[1])
        rows, cols = rows[keep], cols[keep]
        return chart.nd.grid.centers_of(rows, cols), chart.table[rows, cols]

    def test_modulus_is_forced(self, pow2_chart, pow2_map):
        w, psi = self._cells(pow2_chart)
        target = np.abs(pow2_chart.phi(pow2_map.evaluate_array(w)))
        assert np.allclose(np.abs(psi) ** pow2_chart.k, target, rtol=1e-12, atol=0.0)

    def test_chart_is_a_rotated_scaling(self, pow2_chart):
        w, psi = self._cells(pow2_chart)
        scale = np.sqrt(pow2_chart.radius)
        far = np.abs(w) > 0.1
        c = np.mean(psi[far] * scale / w[far])
        c /= abs(c)
        h = pow2_chart.nd.grid.cell_size
        assert np.abs(psi - c * w / scale).max() < 3 * h / scale

    def test_puncture_is_removable(self, pow2_chart):
        h = pow2_chart.nd.grid.cell_size
        assert 0.0 < pow2_chart.puncture_modulus < 3 * (h / pow2_chart.radius) ** 0.5
        near = pow2_chart.psi(np.array([0.5 * h, 0.5j * h, -0.5 * h]))
        assert np.abs(near).max() < 2 * h / np.sqrt(pow2_chart.radius)

    def test_wrong_order_breaks_deck_consistency(self, pow2_map):
        grid = Grid.around(0j, 0.7, 0.02, pow2_map.domain)
        with pytest.raises(MonodromyMismatch) as exc_info:
            build_normal_form(pow2_map, 0j, grid, TOL, radius=0.25, k=3)
        assert exc_info.value.details["k"] == 3


@pytest.mark.unit
class TestDefaultRadius:
    """Test charts on the radius the neighbourhood search picks by itself"""

    @pytest.mark.parametrize("identifier", ["pow2", "pow3", "pow2-shear"])
    def test_chart_is_injective(self, identifier):
        planar_map = get_entry(identifier).map
        grid = Grid.around(0j, 1.0, 0.02, planar_map.domain)
        chart = build_normal_form(planar_map, 0j, grid, 1e-2)
        assert chart.injective
        assert chart.residual <= 1e-2
        report = verify_normal_form(chart, probes=400)
        assert report.injective
        assert report.within_tolerance

    def test_opposite_cells_of_the_fiber_cluster_stay_apart(self, pow2_map):
        grid = Grid.around(0j, 1.0, 0.02, pow2_map.domain)
        chart = build_normal_form(pow2_map, 0j, grid, 1e-2)
        h = grid.cell_size
        w = np.array([2 * h - 2j * h, -2 * h + 2j * h])
        psi = chart.psi(w)
        assert abs(psi[0] - psi[1]) > h / chart.radius
        assert abs(psi[0] + psi[1]) < h / chart.radius


@pytest.mark.unit
class TestInjectivityRetry:
    """Test rebuilding a non-injective chart on smaller neighbourhoods"""

    def _spoiled(self, mocker, failures):
        real_chart = normal_form._chart_on
        radii = []

        def chart_on(planar_map, nd, tol, k):
            chart = real_chart(planar_map, nd, tol, k)
            radii.append(nd.radius)
            if len(radii) <= failures:
                chart = replace(chart, injectivity_violations=5)
            return chart

        mocker.patch.object(normal_form, "_chart_on", side_effect=chart_on)
        return radii

    def test_retry_halves_radius(self, pow2_map, mocker):
        radii = self._spoiled(mocker, failures=1)
        chart = build_normal_form(pow2_map, 0j, Grid.around(0j, 0.7, 0.02, pow2_map.domain), TOL, radius=0.25)
        assert chart.injective
        assert radii == [0.25, 0.125]
        assert chart.nd.radius == 0.125

    def test_gives_up_after_retries(self, pow2_map, mocker):
        radii = self._spoiled(mocker, failures=10)
        with pytest.raises(VerificationFailed) as exc_info:
            build_normal_form(pow2_map, 0j, Grid.around(0j, 0.7, 0.02, pow2_map.domain), TOL, radius=0.25)
        assert len(radii) == normal_form.INJECTIVITY_RETRIES + 1
        assert exc_info.value.details["clause"] == "psi injective"
        assert exc_info.value.details["violations"] == 5
