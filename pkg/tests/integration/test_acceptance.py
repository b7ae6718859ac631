"""
End-to-end property and oracle checks on the built-in maps
These run at fine resolutions and are marked slow
"""

import pytest
import json
import sys
from pathlib import Path

import numpy as np

# Add app directory to path
app_dir = Path(__file__).parent.parent.parent / "app"
sys.path.insert(0, str(app_dir))

from branch_detector import degree_conservation_check, local_degree
from errors import NoRadiusFound
from main import EXIT_OK, main
from map_zoo import get_entry
from normal_domain import establish_normal_domain, fiber_points
from normal_form import build_normal_form, verify_normal_form
from path_lifting import assert_unique_lift, enumerate_ray_lifts, lift_path
from planar_map import Rect
from region import Grid, Polyline
from regularity import check_regularity

pytestmark = [pytest.mark.integration, pytest.mark.slow]


def _domain(identifier, radius, window=0.7, cell=0.01, neighbourhood=False):
    planar_map = get_entry(identifier).map
    grid = Grid.around(0j, window, cell, planar_map.domain)
    nd = establish_normal_domain(planar_map, 0j, grid, radius=radius, require_neighbourhood=neighbourhood)
    return planar_map, nd


def _run_cli(argv, out_dir):
    assert main(argv + ["--out", str(out_dir)]) == EXIT_OK
    return json.loads((out_dir / "report.json").read_text())


class TestLocalDegreeOracle:
    @pytest.mark.parametrize("k", range(1, 7))
    def test_power_maps(self, k, clean_env, temp_output_dir):
        report = _run_cli(["degree", "--map", f"pow{k}", "--at", "0,0", "--rho", "0.1"], temp_output_dir)
        assert report["tasks"][0]["result"]["degree"] == k

    @pytest.mark.parametrize("at", [-1 + 0j, 1 + 0j])
    def test_cubic_critical_points(self, at, cubic_map):
        assert local_degree(cubic_map, at, 0.05).degree == 2

    def test_winding_map(self, winding_map):
        assert local_degree(winding_map, 0j, 0.1).degree == 2

    @pytest.mark.parametrize("identifier", ["pow2", "pow3", "quadratic", "cubic"])
    def test_derivative_vanishing_order(self, identifier):
        entry = get_entry(identifier)
        coeffs = np.array(entry.ground_truth.polynomial)
        rng = np.random.default_rng(11)
        points = list(rng.uniform(-1.2, 1.2, 3) + 1j * rng.uniform(-1.2, 1.2, 3))
        points += [z for z, _ in entry.ground_truth.branch_points]
        for z in points:
            order = 0
            derivative = np.polyder(coeffs)
            while abs(np.polyval(derivative, z)) < 1e-9:
                order += 1
                derivative = np.polyder(derivative)
            assert local_degree(entry.map, z, 0.05).degree == 1 + order


class TestPathLiftingAccuracy:
    def test_square_root_branch(self):
        planar_map, nd = _domain("pow2", 0.25, window=0.6, cell=0.002)
        beta = Polyline.segment(0.16 + 0j, 0.16j)
        result = lift_path(planar_map, nd, beta, 0.4 + 0j, 1e-3)
        oracle = np.sqrt(result.target.vertices)
        assert np.abs(result.lift.vertices - oracle).max() < 5e-3
        assert result.sup_error <= 1e-3


class TestRayLiftCount:
    @pytest.mark.parametrize("identifier,k", [("pow2", 2), ("pow3", 3), ("pow5", 5), ("winding2", 2)])
    def test_count_equals_degree(self, identifier, k):
        cell, tol = 0.01, 1e-3
        planar_map, nd = _domain(identifier, None, window=1.0, cell=cell, neighbourhood=True)
        lifts = enumerate_ray_lifts(planar_map, nd, 1 + 0j, tol)
        assert len(lifts) == k

        end_value = nd.image_center + nd.radius * (1 - tol)
        roots = get_entry(identifier).ground_truth.inverse_branches(end_value)
        for lf in lifts:
            assert min(abs(lf.lift.end - root) for root in roots) < 5 * cell
        assert len(enumerate_ray_lifts(planar_map, nd, 1 + 0j, tol, max_lifts=256)) == k


class TestLiftUniqueness:
    def test_independent_lifts_agree(self):
        tol = 1e-2
        domains = [_domain("pow2", 0.2), _domain("pow3", 0.2), _domain("winding2", 0.2)]
        rng = np.random.default_rng(2024)
        failures = 0
        trials = 0
        while trials < 100:
            planar_map, nd = domains[trials % len(domains)]
            r = nd.radius
            y0, y1 = nd.image_center + 0.8 * r * np.sqrt(rng.random(2)) * np.exp(2j * np.pi * rng.random(2))
            # keep the arc away from the branch value
            t = np.linspace(0.0, 1.0, 65)
            if np.abs(y0 + t * (y1 - y0) - nd.image_center).min() < 0.25 * r:
                continue
            starts = fiber_points(planar_map, nd, y0)
            if not starts:
                continue
            x0 = starts[int(rng.integers(len(starts)))]
            first = lift_path(planar_map, nd, Polyline.segment(y0, y1), x0, tol)
            second = lift_path(planar_map, nd, Polyline.through([y0, 0.5 * (y0 + y1), y1]), x0, tol)
            verdict = assert_unique_lift(planar_map, nd.grid.bounds, first.lift, second.lift, tol)
            failures += 0 if verdict else 1
            trials += 1
        assert failures == 0


class TestBranchDetection:
    def test_cubic(self, clean_env, temp_output_dir):
        report = _run_cli(["branch", "--map", "cubic", "--box", "-2,-2,2,2", "--cell", "0.01"], temp_output_dir)
        result = report["tasks"][0]["result"]
        points = sorted(result["branch_points"], key=lambda p: p["location"][0])
        assert len(points) == 2
        assert abs(complex(*points[0]["location"]) + 1) < 0.02
        assert abs(complex(*points[1]["location"]) - 1) < 0.02
        assert all(p["degree"] == 2 for p in points)
        assert result["pairwise_isolated"] is True

    def test_identity(self, clean_env, temp_output_dir):
        report = _run_cli(["branch", "--map", "pow1", "--box", "-2,-2,2,2", "--cell", "0.01"], temp_output_dir)
        assert report["tasks"][0]["result"]["branch_points"] == []


class TestDegreeConservation:
    @pytest.mark.parametrize("identifier,radius,k", [("pow3", 0.2, 3), ("quadratic", 0.04, 2)])
    def test_counts_match_degree(self, identifier, radius, k):
        planar_map, nd = _domain(identifier, radius, window=1.0)
        report = degree_conservation_check(planar_map, nd, probe_count=50)
        assert report.histogram == {k: 50}
        assert report.dissenting == 0


class TestNormalFormResidual:
    @pytest.mark.parametrize("identifier", ["pow2", "pow3", "winding2", "pow2-shear"])
    def test_chart_at_searched_radius(self, identifier):
        planar_map = get_entry(identifier).map
        grid = Grid.around(0j, 1.0, 0.002, planar_map.domain)
        chart = build_normal_form(planar_map, 0j, grid, 1e-2)
        assert chart.residual < 1e-2
        assert all(ring.consistent for ring in chart.rings)
        assert chart.injective
        assert verify_normal_form(chart, probes=1000).passed


class TestHypothesisViolations:
    def test_modulus_not_open(self):
        report = check_regularity(get_entry("modulus").map, Rect(-1.0, -1.0, 1.0, 1.0), 0.02)
        assert report.openness_suspect

    def test_realpart_not_light(self):
        report = check_regularity(get_entry("realpart").map, Rect(-1.0, -1.0, 1.0, 1.0), 0.02)
        assert report.lightness_suspect

    def test_realpart_has_no_normal_domain(self):
        with pytest.raises(NoRadiusFound):
            _domain("realpart", None)

    def test_normal_command_reports_no_radius(self, clean_env, temp_output_dir, capsys):
        code = main(["normal", "--map", "realpart", "--at", "0,0", "--out", str(temp_output_dir)])
        assert code != EXIT_OK
        assert json.loads(capsys.readouterr().out)["error"]["code"] == "NoRadiusFound"


class TestDeterminism:
    SCENARIO = {
        "map": "pow2",
        "render": True,
        "tasks": [
            {"type": "normal", "at": [0, 0], "radius": 0.25, "window": 0.7},
            {"type": "lift", "at": [0, 0], "radius": 0.25, "window": 0.7, "path": [[0.04, 0], [0.04, 0.1]],
             "start": [0.2, 0], "tol": 0.01},
            {"type": "conservation", "at": [0, 0], "radius": 0.25, "window": 0.7, "probes": 10},
            {"type": "branch", "box": [-0.5, -0.5, 0.5, 0.5], "cell": 0.05},
        ],
    }

    def _run(self, scenario_path, out_dir):
        assert main(["run", str(scenario_path), "--seed", "7", "--out", str(out_dir)]) == EXIT_OK
        report = json.loads((out_dir / "report.json").read_text())
        report.pop("timing")
        svgs = {p.name: p.read_bytes() for p in sorted(out_dir.glob("*.svg"))}
        return report, svgs

    def test_same_seed_same_outputs(self, clean_env, temp_output_dir):
        path = temp_output_dir / "scenario.json"
        path.write_text(json.dumps(self.SCENARIO))
        first = self._run(path, temp_output_dir / "a")
        second = self._run(path, temp_output_dir / "b")
        assert first == second
        assert len(first[1]) == 4
