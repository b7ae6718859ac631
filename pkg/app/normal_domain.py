#!/usr/bin/env python3
"""
Normal domains for branchcover
Radius search, construction and verification of U(x, f, r), and normal-neighbourhood tests
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from errors import NoRadiusFound, VerificationFailed
from planar_map import PlanarMap
from region import (
    CellRegion,
    CellSet,
    DiskTarget,
    Grid,
    PreimageIndex,
    components,
    connected_component,
    dilate,
    hausdorff_distance,
    rasterize_preimage,
    region_boundary,
)

logger = logging.getLogger(__name__)

DEFAULT_FILL_THRESHOLD = 0.99
DEFAULT_BOUNDARY_FACTOR = 3.0
FILL_SAMPLES = 1000
CIRCLE_SAMPLES = 720
MIN_HALF_SIDE_CELLS = 2
NEIGHBOURHOOD_SLACK_CELLS = 2
MAX_RADIUS_HALVINGS = 12


@dataclass(frozen=True)
class NormalityEvidence:
    """Discrete certificate for ∂fU = f∂U and fU = B(f(x), r)"""

    boundary_hausdorff: float
    image_fill: float
    boundary_threshold: float
    fill_threshold: float
    fill_tolerance: float
    lipschitz: float

    @property
    def passed(self) -> bool:
        return (
            self.boundary_hausdorff <= self.boundary_threshold
            and self.image_fill >= self.fill_threshold
        )

    def to_dict(self) -> Dict:
        return {
            "boundary_hausdorff": self.boundary_hausdorff,
            "image_fill": self.image_fill,
            "boundary_threshold": self.boundary_threshold,
            "fill_threshold": self.fill_threshold,
            "fill_tolerance": self.fill_tolerance,
            "lipschitz": self.lipschitz,
        }


@dataclass(frozen=True, eq=False)
class NormalDomain:
    """
    Verified approximation of U(x, f, r)

    `fiber_tol` is the image-side tolerance used for fiber clusters: 1.5 times
    the largest image jump between edge-adjacent region cells.
    """

    map: PlanarMap = field(repr=False)
    center: complex
    radius: float
    region: CellRegion = field(repr=False)
    image_center: complex
    evidence: NormalityEvidence
    fiber_tol: float
    verified: bool = True

    @property
    def grid(self) -> Grid:
        return self.region.grid

    @property
    def center_cell(self) -> Tuple[int, int]:
        return self.grid.cell_of(self.center)

    @cached_property
    def index(self) -> PreimageIndex:
        return PreimageIndex(self.map, self.region)

    def local_lipschitz(self) -> float:
        """Largest image jump per cell edge, a local stretch estimate"""
        return self.fiber_tol / 1.5 / self.grid.cell_size

    def to_dict(self, include_members: bool = True) -> Dict:
        region = {
            "cells": len(self.region),
            "diameter": self.region.diameter,
        }
        if include_members:
            region.update(self.region.to_dict())
        return {
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "image_center": [self.image_center.real, self.image_center.imag],
            "fiber_tol": self.fiber_tol,
            "verified": self.verified,
            "evidence": self.evidence.to_dict(),
            "region": region,
        }


def _square_boundary(center: complex, half_side: float, spacing: float) -> np.ndarray:
    """Closed loop of samples on the boundary of the square around center"""
    per_side = max(4, int(math.ceil(2 * half_side / spacing)))
    t = np.arange(per_side) / per_side
    s = half_side
    corners = [complex(s, -s), complex(s, s), complex(-s, s), complex(-s, -s)]
    sides = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        sides.append(a + (b - a) * t)
    return center + np.concatenate(sides)


def search_normal_window(
    planar_map: PlanarMap, x: complex, grid: Grid, initial_half_side: Optional[float] = None
) -> Tuple[float, float]:
    """
    Find a radius r for x by shrinking square neighbourhoods V dyadically

    Args:
        planar_map: The map
        x: Center point, interior to the grid
        grid: Working grid
        initial_half_side: Half-side of the first V (defaults to the largest square in the grid)

    Returns:
        (r, half_side of the V that produced it)

    Raises:
        NoRadiusFound: if every V down to 4 cells has a boundary sample mapping onto f(x)
    """
    x = complex(x)
    h = grid.cell_size
    fx = planar_map.evaluate(x)
    room = grid.bounds.distance_to_edge(x) - h
    half_side = min(initial_half_side or room, room)
    floor = MIN_HALF_SIDE_CELLS * h

    closest = None
    while half_side >= floor - 1e-12:
        loop = _square_boundary(x, half_side, h / 2.0)
        images = planar_map.evaluate_array(loop)
        jumps = np.abs(np.diff(np.concatenate([images, images[:1]])))
        tolerance = float(jumps.max())
        gap = float(np.abs(images - fx).min())
        logger.debug(f"V half-side {half_side:.5f}: gap {gap:.3e}, tolerance {tolerance:.3e}")
        if gap > tolerance:
            radius = 0.5 * gap
            logger.info(f"Normal radius {radius:.5f} at {x} from V half-side {half_side:.5f}")
            return radius, half_side
        closest = gap
        half_side /= 2.0

    raise NoRadiusFound(
        f"Every square neighbourhood of {x} down to {MIN_HALF_SIDE_CELLS * 2} cells "
        f"has a boundary point mapping onto f(x)",
        {"point": [x.real, x.imag], "last_gap": closest, "cell_size": h},
    )


def find_normal_radius(planar_map: PlanarMap, x: complex, grid: Grid) -> float:
    """Radius r with B(f(x), r) disjoint from f(∂V) for some square V around x"""
    radius, _ = search_normal_window(planar_map, x, grid)
    return radius


def max_image_jump(planar_map: PlanarMap, cells: CellSet) -> float:
    """Largest |f(c) - f(c')| over edge-adjacent member cells c, c' (cell centers)"""
    rows, cols = cells.cells()
    if len(rows) == 0:
        return 0.0
    r0, r1, c0, c1 = rows.min(), rows.max() + 1, cols.min(), cols.max() + 1
    sub = cells.mask[r0:r1, c0:c1]
    rr, cc = np.mgrid[r0:r1, c0:c1]
    images = planar_map.evaluate_array(cells.grid.centers_of(rr, cc))
    jump = 0.0
    horizontal = sub[:, 1:] & sub[:, :-1]
    if horizontal.any():
        jump = max(jump, float(np.abs(np.diff(images, axis=1))[horizontal].max()))
    vertical = sub[1:, :] & sub[:-1, :]
    if vertical.any():
        jump = max(jump, float(np.abs(np.diff(images, axis=0))[vertical].max()))
    return jump


def build_normal_domain(
    planar_map: PlanarMap,
    x: complex,
    r: float,
    grid: Grid,
    fill_threshold: float = DEFAULT_FILL_THRESHOLD,
    boundary_factor: float = DEFAULT_BOUNDARY_FACTOR,
    seed: int = 0,
    verify: bool = True,
) -> NormalDomain:
    """
    Build U(x, f, r) on `grid` and collect normality evidence

    Args:
        planar_map: The map
        x: Center point
        r: Radius, at most the output of find_normal_radius
        grid: Working grid
        fill_threshold: Minimum image fill fraction
        boundary_factor: Boundary threshold is boundary_factor * cell_size * L
        seed: Seed of the image-fill sample
        verify: If False, evidence is recorded but not enforced

    Returns:
        NormalDomain

    Raises:
        VerificationFailed: if the region touches the grid border or the evidence
            is outside tolerance
    """
    x = complex(x)
    h = grid.cell_size
    fx = planar_map.evaluate(x)
    cells = rasterize_preimage(planar_map, DiskTarget(fx, r), grid)
    region = connected_component(cells, grid.cell_of(x))

    if verify and region.touches_border:
        raise VerificationFailed(
            f"Component of the preimage of B(f(x), {r}) reaches the grid border",
            {"radius": r, "cells": len(region), "grid": grid.to_dict()},
        )

    jump = max_image_jump(planar_map, region)
    fiber_tol = max(1.5 * jump, 1e-9 * (1.0 + abs(fx)))
    lipschitz = planar_map.lipschitz_hint or max(jump / h, 1e-12)

    boundary_points = region_boundary(region)
    theta = 2 * np.pi * np.arange(CIRCLE_SAMPLES) / CIRCLE_SAMPLES
    circle = fx + r * np.exp(1j * theta)
    if len(boundary_points):
        boundary_hausdorff = hausdorff_distance(planar_map.evaluate_array(boundary_points), circle)
    else:
        boundary_hausdorff = math.inf

    rng = np.random.default_rng(seed)
    radii = r * np.sqrt(rng.random(FILL_SAMPLES))
    angles = 2 * np.pi * rng.random(FILL_SAMPLES)
    probes = fx + radii * np.exp(1j * angles)
    center_images = planar_map.evaluate_array(region.centers())
    tree = cKDTree(np.column_stack([center_images.real, center_images.imag]))
    distances, _ = tree.query(np.column_stack([probes.real, probes.imag]))
    fill_tolerance = 3.0 * fiber_tol
    image_fill = float(np.mean(distances <= fill_tolerance))

    evidence = NormalityEvidence(
        boundary_hausdorff=float(boundary_hausdorff),
        image_fill=image_fill,
        boundary_threshold=boundary_factor * h * lipschitz,
        fill_threshold=fill_threshold,
        fill_tolerance=fill_tolerance,
        lipschitz=float(lipschitz),
    )
    logger.debug(
        f"Normal domain at {x}, r={r:.5f}: {len(region)} cells, "
        f"boundary {evidence.boundary_hausdorff:.3e}/{evidence.boundary_threshold:.3e}, "
        f"fill {evidence.image_fill:.4f}"
    )

    if verify and not evidence.passed:
        raise VerificationFailed(
            f"Normal domain evidence out of tolerance at r={r}",
            evidence.to_dict(),
        )

    return NormalDomain(
        map=planar_map,
        center=x,
        radius=float(r),
        region=region,
        image_center=fx,
        evidence=evidence,
        fiber_tol=fiber_tol,
        verified=verify,
    )


def center_fiber_cluster(nd: NormalDomain) -> CellRegion:
    """Cluster of near-fiber cells of f(center) containing the center cell"""
    near = nd.index.near_fiber(nd.image_center)
    if nd.center_cell not in near:
        near.mask[nd.center_cell] = True
    return connected_component(near, nd.center_cell)


def is_normal_neighbourhood(planar_map: PlanarMap, nd: NormalDomain) -> bool:
    """
    True iff every region cell mapping near f(center) lies within 2 cells of the
    center's fiber cluster
    """
    near = nd.index.near_fiber(nd.image_center)
    allowed = dilate(center_fiber_cluster(nd).mask, NEIGHBOURHOOD_SLACK_CELLS)
    stray = near.mask & ~allowed
    if stray.any():
        rows, cols = np.nonzero(stray)
        far = nd.grid.centers_of(rows[:1], cols[:1])[0]
        logger.info(f"Fiber of f({nd.center}) also meets the region near {far}")
        return False
    return True


def polish_preimages(
    planar_map: PlanarMap,
    starts: np.ndarray,
    targets: np.ndarray,
    half_width: float,
    iterations: int = 10,
) -> np.ndarray:
    """
    Derivative-free refinement of z with f(z) ≈ target, one point per target

    Shrinking 7x7 pattern search around each start; every step stays inside
    the box of `half_width` around the current best point.
    """
    best = np.asarray(starts, dtype=complex).copy()
    targets = np.asarray(targets, dtype=complex)
    if best.size == 0:
        return best
    steps = np.linspace(-1.0, 1.0, 7)
    pattern = (steps[None, :] + 1j * steps[:, None]).ravel()
    width = half_width
    for _ in range(iterations):
        candidates = best[:, None] + width * pattern[None, :]
        errors = np.abs(planar_map.evaluate_array(candidates) - targets[:, None])
        best = candidates[np.arange(len(best)), np.argmin(errors, axis=1)]
        width /= 3.0
    return best


def fiber_points(planar_map: PlanarMap, nd: NormalDomain, y: complex) -> List[complex]:
    """One polished preimage of y per fiber cluster of y in the region"""
    near = nd.index.near_fiber(y)
    grid = nd.grid
    starts = []
    for cluster in components(near):
        centers = cluster.centers()
        values = planar_map.evaluate_array(centers)
        starts.append(centers[int(np.argmin(np.abs(values - y)))])
    if not starts:
        return []
    polished = polish_preimages(
        planar_map, np.array(starts), np.full(len(starts), y), 1.5 * grid.cell_size
    )
    return [complex(p) for p in polished]


def establish_normal_domain(
    planar_map: PlanarMap,
    x: complex,
    grid: Grid,
    radius: Optional[float] = None,
    require_neighbourhood: bool = False,
    fill_threshold: float = DEFAULT_FILL_THRESHOLD,
    boundary_factor: float = DEFAULT_BOUNDARY_FACTOR,
    seed: int = 0,
) -> NormalDomain:
    """
    Find a verified normal domain of x, halving the radius on verification failure

    Args:
        planar_map: The map
        x: Center point
        grid: Working grid
        radius: Starting radius (defaults to find_normal_radius)
        require_neighbourhood: Also require a normal neighbourhood of x
        fill_threshold: See build_normal_domain
        boundary_factor: See build_normal_domain
        seed: See build_normal_domain

    Returns:
        NormalDomain
    """
    r = radius if radius is not None else find_normal_radius(planar_map, x, grid)
    last_error: Optional[VerificationFailed] = None
    for attempt in range(MAX_RADIUS_HALVINGS):
        try:
            nd = build_normal_domain(
                planar_map, x, r, grid, fill_threshold, boundary_factor, seed
            )
            if not require_neighbourhood or is_normal_neighbourhood(planar_map, nd):
                return nd
            last_error = VerificationFailed(
                f"Normal domain at r={r} is not a normal neighbourhood of {x}",
                {"radius": r},
            )
        except VerificationFailed as e:
            last_error = e
        logger.debug(f"Radius {r:.5f} rejected at {x}: {last_error.message}")
        r /= 2.0
    raise last_error
