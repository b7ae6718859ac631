"""
Pytest configuration and shared fixtures for branchcover tests
"""

import pytest
import os
import tempfile
import shutil
from pathlib import Path
from unittest.mock import patch

# Add app directory to path for imports
import sys
sys.path.insert(0, str(Path(__file__).parent.parent / 'app'))

from map_zoo import get_entry
from normal_domain import establish_normal_domain
from region import Grid

# Import mocks
from tests.mocks.map_mocks import affine_map, shifted_power_map


@pytest.fixture
def temp_output_dir():
    """Create a temporary output directory for reports and SVGs"""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture
def clean_env():
    """Environment without any BRANCHCOVER_* variables"""
    env = {k: v for k, v in os.environ.items() if not k.startswith('BRANCHCOVER_')}
    with patch.dict(os.environ, env, clear=True):
        yield


@pytest.fixture
def pow2_map():
    return get_entry('pow2').map


@pytest.fixture
def pow3_map():
    return get_entry('pow3').map


@pytest.fixture
def cubic_map():
    return get_entry('cubic').map


@pytest.fixture
def winding_map():
    return get_entry('winding2').map


@pytest.fixture
def identity_map():
    return get_entry('pow1').map


@pytest.fixture
def scaled_map():
    """z -> 2z + 0.1"""
    return affine_map(2.0, 0.1)


@pytest.fixture
def off_center_map():
    """z -> (z - 0.3 - 0.2i)^2"""
    return shifted_power_map(2, 0.3 + 0.2j)


@pytest.fixture
def origin_grid():
    """Square window of half-side 0.6 around the origin at cell 0.01"""
    return Grid.around(0j, 0.6, 0.01)


@pytest.fixture(scope='session')
def pow2_domain():
    """Verified U(0, z^2, 0.25) on a 0.01 grid, shared across tests"""
    planar_map = get_entry('pow2').map
    grid = Grid.around(0j, 0.7, 0.01, planar_map.domain)
    return establish_normal_domain(planar_map, 0j, grid, radius=0.25)


@pytest.fixture(scope='session')
def identity_domain():
    """Verified U(0, z, 0.3) on a 0.01 grid"""
    planar_map = get_entry('pow1').map
    grid = Grid.around(0j, 0.5, 0.01, planar_map.domain)
    return establish_normal_domain(planar_map, 0j, grid, radius=0.3)


@pytest.fixture
def sample_scenario():
    """Minimal valid scenario document"""
    return {
        'map': 'pow2',
        'tasks': [
            {'type': 'degree', 'at': [0, 0], 'rho': 0.1},
        ],
    }
