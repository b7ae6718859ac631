"""
Mock maps for testing branchcover
"""

from .map_mocks import (
    CountingMap,
    affine_map,
    constant_map,
    fold_map,
    shifted_power_map,
    unit_square_domain,
)

__all__ = [
    'CountingMap',
    'affine_map',
    'constant_map',
    'fold_map',
    'shifted_power_map',
    'unit_square_domain',
]
