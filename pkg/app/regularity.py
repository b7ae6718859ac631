#!/usr/bin/env python3
"""
Heuristic regularity prechecks for branchcover
Openness by winding on dyadic circles, lightness by fiber cluster diameters
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from errors import OutOfDomain
from planar_map import PlanarMap, Rect
from region import NEAR_FIBER_FACTOR, CellSet, Grid, PreimageIndex, cells_diameter, components

logger = logging.getLogger(__name__)

LATTICE_POINTS = 9
DYADIC_LEVELS = 4
MIN_LOOP_SAMPLES = 64
MAX_LOOP_SAMPLES = 4096
FIBER_PROBES = 24
LIGHTNESS_CELLS = 10.0
LIGHTNESS_FRACTION = 0.25
MAX_WITNESSES = 5


@dataclass(frozen=True)
class RegularityReport:
    """Flags with witness points; a clean report is evidence, not proof"""

    region: Rect
    resolution: float
    openness_suspect: bool
    lightness_suspect: bool
    openness_witnesses: List[complex] = field(default_factory=list)
    lightness_witnesses: List[complex] = field(default_factory=list)
    points_probed: int = 0
    fibers_probed: int = 0
    largest_fiber_diameter: float = 0.0

    @property
    def clean(self) -> bool:
        return not (self.openness_suspect or self.lightness_suspect)

    def to_dict(self) -> Dict:
        return {
            "region": self.region.to_list(),
            "resolution": self.resolution,
            "openness_suspect": self.openness_suspect,
            "lightness_suspect": self.lightness_suspect,
            "clean": self.clean,
            "openness_witnesses": [[w.real, w.imag] for w in self.openness_witnesses],
            "lightness_witnesses": [[w.real, w.imag] for w in self.lightness_witnesses],
            "points_probed": self.points_probed,
            "fibers_probed": self.fibers_probed,
            "largest_fiber_diameter": self.largest_fiber_diameter,
        }


def _dyadic_radii(region: Rect, resolution: float) -> List[float]:
    top = min(region.width, region.height) / 8.0
    radii = [top / 2**j for j in range(DYADIC_LEVELS)]
    kept = [rho for rho in radii if rho >= 2.0 * resolution]
    return kept or [top]


def _openness_evidence(planar_map: PlanarMap, points: np.ndarray, rho: float, resolution: float) -> np.ndarray:
    """
    True where the image of the circle of radius rho winds around f(z)

    A resolved nonzero winding means f(B(z, rho)) contains a disk around f(z).
    """
    n = int(np.clip(np.ceil(2 * np.pi * rho / resolution), MIN_LOOP_SAMPLES, MAX_LOOP_SAMPLES))
    circle = rho * np.exp(2j * np.pi * np.arange(n) / n)
    centers = planar_map.evaluate_array(points)
    values = planar_map.evaluate_array(points[:, None] + circle[None, :]) - centers[:, None]
    gap = np.abs(values).min(axis=1)
    scale = 1e-12 * (1.0 + np.abs(centers))
    with np.errstate(divide="ignore", invalid="ignore"):
        increments = np.angle(np.roll(values, -1, axis=1) / values)
    resolved = (gap > scale) & (np.abs(increments).max(axis=1) < np.pi / 2)
    winding = np.round(increments.sum(axis=1) / (2 * np.pi)).astype(int)
    return resolved & (winding != 0)


def _check_openness(planar_map: PlanarMap, region: Rect, resolution: float) -> List[complex]:
    radii = _dyadic_radii(region, resolution)
    inset = radii[0]
    xs = np.linspace(region.x0 + inset, region.x1 - inset, LATTICE_POINTS)
    ys = np.linspace(region.y0 + inset, region.y1 - inset, LATTICE_POINTS)
    points = (xs[None, :] + 1j * ys[:, None]).ravel()
    witnessed = np.zeros(points.shape, dtype=bool)
    for rho in radii:
        pending = ~witnessed
        if not pending.any():
            break
        witnessed[pending] = _openness_evidence(planar_map, points[pending], rho, resolution)
    suspects = points[~witnessed]
    if len(suspects):
        logger.info(f"{len(suspects)} of {len(points)} points show no disk around f(z) at any dyadic radius")
    return [complex(p) for p in suspects]


def _check_lightness(
    planar_map: PlanarMap, region: Rect, resolution: float, seed: int
) -> Tuple[List[complex], int, float]:
    grid = Grid(region, resolution)
    index = PreimageIndex(planar_map, CellSet(grid, np.ones(grid.shape, dtype=bool)))
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(index.center_images), FIBER_PROBES - 1)
    fibers = np.concatenate([[planar_map.evaluate(region.center)], index.center_images[picks]])

    diagonal = abs(complex(region.width, region.height))
    limit = max(LIGHTNESS_CELLS * resolution, LIGHTNESS_FRACTION * diagonal)
    largest = 0.0
    witnesses: List[complex] = []
    for y in fibers:
        close = np.abs(index.center_images - y) <= NEAR_FIBER_FACTOR * index.local_jump
        mask = np.zeros(grid.shape, dtype=bool)
        mask.flat[index.flat[close]] = True
        for cluster in components(CellSet(grid, mask)):
            diameter = cells_diameter(cluster)
            largest = max(largest, diameter)
            if diameter > limit and len(witnesses) < MAX_WITNESSES:
                centers = cluster.centers()
                witnesses.append(complex(centers[len(centers) // 2]))
                logger.debug(f"Fiber of {complex(y)} has a component of diameter {diameter:.4f}")
    return witnesses, len(fibers), largest


def check_regularity(
    planar_map: PlanarMap, region: Rect, resolution: float, seed: int = 0
) -> RegularityReport:
    """
    Heuristic openness and lightness probes over a rectangle

    Args:
        planar_map: The map
        region: Rectangle inside the map's domain
        resolution: Cell size of the fiber probe and arc spacing of the winding loops
        seed: Seed for choosing the probed fibers

    Returns:
        RegularityReport

    Raises:
        OutOfDomain: if the rectangle is not inside the domain
    """
    if not planar_map.domain.contains_rect(region):
        raise OutOfDomain(
            f"Region {region.to_list()} is not inside the domain of {planar_map.label}",
            {"region": region.to_list()},
        )
    open_witnesses = _check_openness(planar_map, region, resolution)
    light_witnesses, fibers, largest = _check_lightness(planar_map, region, resolution, seed)
    report = RegularityReport(
        region=region,
        resolution=resolution,
        openness_suspect=bool(open_witnesses),
        lightness_suspect=bool(light_witnesses),
        openness_witnesses=open_witnesses[:MAX_WITNESSES],
        lightness_witnesses=light_witnesses,
        points_probed=LATTICE_POINTS**2,
        fibers_probed=fibers,
        largest_fiber_diameter=largest,
    )
    logger.info(
        f"Regularity of {planar_map.label} on {region.to_list()}: "
        f"openness_suspect={report.openness_suspect}, lightness_suspect={report.lightness_suspect}"
    )
    return report
