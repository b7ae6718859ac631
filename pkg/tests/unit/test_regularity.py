#!/usr/bin/env python3
"""
Unit tests for regularity module
"""

import pytest
import sys
from pathlib import Path

# Add app directory to path
app_dir = Path(__file__).parent.parent.parent / "app"
sys.path.insert(0, str(app_dir))

from errors import OutOfDomain
from map_zoo import get_entry
from planar_map import Rect
from regularity import RegularityReport, check_regularity

BOX = Rect(-1.0, -1.0, 1.0, 1.0)


@pytest.mark.unit
class TestCheckRegularity:
    """Test openness and lightness probes"""

    def test_pow2_is_clean(self, pow2_map):
        report = check_regularity(pow2_map, BOX, 0.05)
        assert report.clean
        assert report.points_probed == 81

    def test_modulus_is_not_open(self):
        report = check_regularity(get_entry("modulus").map, BOX, 0.05)
        assert report.openness_suspect
        assert report.openness_witnesses

    def test_realpart_is_not_light(self):
        report = check_regularity(get_entry("realpart").map, BOX, 0.05)
        assert report.lightness_suspect
        assert report.largest_fiber_diameter > 1.0

    def test_region_outside_domain(self, pow2_map):
        with pytest.raises(OutOfDomain):
            check_regularity(pow2_map, Rect(-3.0, -1.0, 1.0, 1.0), 0.05)

    def test_seed_is_deterministic(self, cubic_map):
        first = check_regularity(cubic_map, BOX, 0.05, seed=4)
        second = check_regularity(cubic_map, BOX, 0.05, seed=4)
        assert first.to_dict() == second.to_dict()


@pytest.mark.unit
class TestRegularityReport:
    def test_clean_flag(self):
        report = RegularityReport(BOX, 0.05, openness_suspect=False, lightness_suspect=True)
        assert not report.clean
        assert report.to_dict()["clean"] is False
