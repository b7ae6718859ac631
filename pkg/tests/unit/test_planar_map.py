#!/usr/bin/env python3
"""
Unit tests for planar_map module
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add app directory to path
app_dir = Path(__file__).parent.parent.parent / "app"
sys.path.insert(0, str(app_dir))

from errors import OutOfDomain, ParseError
from planar_map import (
    DomainSpec,
    PlanarMap,
    Rect,
    compose,
    conjugation,
    evaluate,
    load_sampled_map,
    radial_stretch,
    sampled_map,
    sample_lattice,
    shear,
    write_sampled_map,
)


@pytest.mark.unit
class TestRect:
    """Test rectangle geometry"""

    def test_rejects_degenerate_rectangle(self):
        with pytest.raises(ValueError):
            Rect(0.0, 0.0, 0.0, 1.0)

    def test_center_and_size(self):
        rect = Rect(-1.0, 0.0, 3.0, 2.0)
        assert rect.width == 4.0
        assert rect.height == 2.0
        assert rect.center == complex(1.0, 1.0)

    def test_contains_is_closed(self):
        rect = Rect(0.0, 0.0, 1.0, 1.0)
        inside = rect.contains(np.array([0.0, 1 + 1j, 0.5 + 0.5j, 1.5]))
        assert inside.tolist() == [True, True, True, False]

    def test_square_and_distance_to_edge(self):
        square = Rect.square(0.5 + 0.5j, 0.5)
        assert square.to_list() == [0.0, 0.0, 1.0, 1.0]
        assert square.distance_to_edge(0.25 + 0.5j) == pytest.approx(0.25)

    def test_intersect(self):
        a = Rect(0.0, 0.0, 2.0, 2.0)
        b = Rect(1.0, -1.0, 3.0, 1.0)
        assert a.intersect(b).to_list() == [1.0, 0.0, 2.0, 1.0]


@pytest.mark.unit
class TestDomainSpec:
    """Test rectangle and disk domains"""

    def test_disk_needs_positive_radius(self):
        with pytest.raises(ValueError):
            DomainSpec.disk(0j, 0.0)

    def test_disk_contains_rect(self):
        disk = DomainSpec.disk(0j, 1.0)
        assert disk.contains_rect(Rect.square(0j, 0.5))
        assert not disk.contains_rect(Rect.square(0j, 0.8))

    def test_bounding_rect_of_disk(self):
        disk = DomainSpec.disk(1 + 1j, 0.5)
        assert disk.bounding_rect().to_list() == [0.5, 0.5, 1.5, 1.5]

    def test_to_dict_shapes(self):
        assert DomainSpec.rectangle(0, 0, 1, 1).to_dict()["shape"] == "rectangle"
        assert DomainSpec.disk(0j, 1.0).to_dict()["shape"] == "disk"


@pytest.mark.unit
class TestEvaluate:
    """Test map evaluation"""

    def test_evaluate_inside(self, pow2_map):
        assert evaluate(pow2_map, 1 + 1j) == pytest.approx(2j)

    def test_evaluate_outside_raises(self, pow2_map):
        with pytest.raises(OutOfDomain) as exc_info:
            evaluate(pow2_map, 3.0 + 0j)
        assert exc_info.value.code == "OutOfDomain"
        assert exc_info.value.details["point"] == [3.0, 0.0]

    def test_evaluate_array_keeps_shape(self, pow2_map):
        points = np.array([[1, 1j], [-1, -1j]], dtype=complex)
        values = pow2_map.evaluate_array(points)
        assert values.shape == (2, 2)
        assert np.allclose(values, [[1, -1], [1, -1]])

    def test_rejects_nonpositive_lipschitz_hint(self):
        with pytest.raises(ValueError):
            PlanarMap(domain=DomainSpec.disk(0j, 1.0), func=lambda z: z, lipschitz_hint=0.0)


@pytest.mark.unit
class TestHomeomorphisms:
    """Test homeomorphism helpers and composition"""

    @pytest.mark.parametrize("homeo", [shear(0.5), radial_stretch(), conjugation()])
    def test_inverse_undoes_forward(self, homeo):
        rng = np.random.default_rng(7)
        points = rng.uniform(-1.5, 1.5, 50) + 1j * rng.uniform(-1.5, 1.5, 50)
        assert np.allclose(homeo.inverse(homeo(points)), points, atol=1e-12)

    def test_shear_moves_x_by_y(self):
        assert complex(shear(0.5)(np.array([1j]))[0]) == pytest.approx(0.5 + 1j)

    def test_compose_order(self, pow2_map):
        composed = compose(conjugation(), pow2_map, shear(0.5))
        z = np.array([0.2 + 0.4j])
        expected = np.conj((z + 0.5 * z.imag) ** 2)
        assert np.allclose(composed.evaluate_array(z), expected)

    def test_compose_scales_lipschitz_hint(self, pow2_map):
        composed = compose(None, pow2_map, shear(0.5))
        assert composed.lipschitz_hint == pytest.approx(pow2_map.lipschitz_hint * 1.5)

    def test_compose_explicit_lipschitz_hint(self, pow2_map):
        composed = compose(None, pow2_map, shear(0.5), lipschitz_hint=12.0)
        assert composed.lipschitz_hint == 12.0

    def test_compose_default_label(self, pow2_map):
        composed = compose(conjugation(), pow2_map, None)
        assert composed.label == "conjugation∘pow2"


@pytest.mark.unit
class TestSampledMaps:
    """Test sampled-map wrapping and the text format"""

    def test_bilinear_is_exact_on_nodes(self, pow2_map):
        bounds = Rect(-1.0, -1.0, 1.0, 1.0)
        values = sample_lattice(pow2_map, bounds, 21, 21)
        sampled = sampled_map(values, bounds)
        nodes = np.array([-1 - 1j, 0.1 + 0.2j, 1 + 1j])
        assert np.allclose(sampled.evaluate_array(nodes), nodes**2, atol=1e-12)

    def test_bilinear_error_is_small_between_nodes(self, pow2_map):
        bounds = Rect(-1.0, -1.0, 1.0, 1.0)
        sampled = sampled_map(sample_lattice(pow2_map, bounds, 201, 201), bounds)
        z = np.array([0.123 + 0.456j, -0.777 + 0.05j])
        assert np.abs(sampled.evaluate_array(z) - z**2).max() < 1e-3

    def test_write_then_load(self, pow2_map, temp_output_dir):
        bounds = Rect(-1.0, -1.0, 1.0, 1.0)
        path = write_sampled_map(temp_output_dir / "pow2.txt", pow2_map, bounds, 11, 9)
        loaded = load_sampled_map(path)
        assert loaded.domain.rect == bounds
        z = np.array([0.4 - 0.25j])
        assert np.allclose(loaded.evaluate_array(z), sampled_map(sample_lattice(pow2_map, bounds, 11, 9), bounds)(z))

    def test_load_bad_header(self, temp_output_dir):
        path = temp_output_dir / "bad.txt"
        path.write_text("lattice 2 2 0 0 1 1\n0 0\n0 0\n0 0\n0 0\n")
        with pytest.raises(ParseError) as exc_info:
            load_sampled_map(path)
        assert exc_info.value.line == 1
        assert exc_info.value.field == "header"

    def test_load_bad_sample_reports_line(self, temp_output_dir):
        path = temp_output_dir / "bad.txt"
        path.write_text("grid 2 2 0 0 1 1\n0 0\n0 0\nnot-a-number 0\n0 0\n")
        with pytest.raises(ParseError) as exc_info:
            load_sampled_map(path)
        assert exc_info.value.line == 4
        assert exc_info.value.field == "samples"

    def test_load_wrong_sample_count(self, temp_output_dir):
        path = temp_output_dir / "short.txt"
        path.write_text("grid 2 2 0 0 1 1\n0 0\n0 0\n")
        with pytest.raises(ParseError):
            load_sampled_map(path)

    def test_load_missing_file(self, temp_output_dir):
        with pytest.raises(ParseError):
            load_sampled_map(temp_output_dir / "missing.txt")
