#!/usr/bin/env python3
"""
Branch set detection for branchcover
Local degree by winding, preimage counting, branch point detection and degree conservation
"""

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from errors import (
    BranchCoverError,
    DegenerateLoop,
    NonIsolatedBranch,
    OutOfDomain,
    PreconditionFailed,
    Unresolved,
)
from normal_domain import NormalDomain
from planar_map import PlanarMap, Rect
from path_lifting import enumerate_ray_lifts
from region import Grid, components, label_cells, region_boundary

logger = logging.getLogger(__name__)

MIN_SAMPLES = 64
MAX_SAMPLES = 2**16
DEGENERATE_GAP = 1e-9
ISOLATION_PROBES = 8
ROWS_PER_CHUNK = 64
DEFAULT_MARGIN = 0.05


@dataclass(frozen=True)
class LocalDegreeResult:
    point: complex
    rho: float
    degree: int
    min_image_gap: float
    samples: int

    def to_dict(self) -> Dict:
        return {
            "point": [self.point.real, self.point.imag],
            "rho": self.rho,
            "degree": self.degree,
            "min_image_gap": self.min_image_gap,
            "samples": self.samples,
        }


@dataclass(frozen=True)
class BranchPoint:
    location: complex
    degree: int
    isolation_radius: float

    def to_dict(self) -> Dict:
        return {
            "location": [self.location.real, self.location.imag],
            "degree": self.degree,
            "isolation_radius": self.isolation_radius,
        }


@dataclass(frozen=True)
class BranchReport:
    """Isolated branch points found in a search rectangle at one resolution"""

    search_region: Rect
    branch_points: List[BranchPoint]
    resolution: float
    candidate_clusters: int = 0

    def is_pairwise_isolated(self) -> bool:
        """Pairwise distances exceed the sum of isolation radii"""
        for a, b in combinations(self.branch_points, 2):
            if abs(a.location - b.location) <= a.isolation_radius + b.isolation_radius:
                return False
        return True

    def to_dict(self) -> Dict:
        return {
            "search_region": self.search_region.to_list(),
            "resolution": self.resolution,
            "candidate_clusters": self.candidate_clusters,
            "pairwise_isolated": self.is_pairwise_isolated(),
            "branch_points": [p.to_dict() for p in self.branch_points],
        }


@dataclass(frozen=True)
class ConservationReport:
    degree: Optional[int]
    counts: List[int] = field(repr=False)
    probes: int = 0

    @property
    def histogram(self) -> Dict[int, int]:
        return dict(sorted(Counter(self.counts).items()))

    @property
    def dissenting(self) -> int:
        if self.degree is None:
            return len(self.counts)
        return sum(1 for c in self.counts if c != abs(self.degree))

    @property
    def consistent(self) -> bool:
        return self.degree is not None and self.dissenting == 0

    def to_dict(self) -> Dict:
        return {
            "degree": self.degree,
            "probes": self.probes,
            "counts": self.counts,
            "histogram": {str(k): v for k, v in self.histogram.items()},
            "dissenting": self.dissenting,
            "consistent": self.consistent,
        }


def _winding_increments(values: np.ndarray) -> np.ndarray:
    """Principal argument increments around a closed loop (last point joins the first)"""
    return np.angle(np.roll(values, -1, axis=-1) / values)


def local_degree(
    planar_map: PlanarMap,
    z: complex,
    rho: float,
    samples: int = MIN_SAMPLES,
    gap_tol: float = DEGENERATE_GAP,
) -> LocalDegreeResult:
    """
    Winding number of f(z + ρe^{iθ}) - f(z) around 0

    The loop sample count doubles until two consecutive estimates agree and
    every argument increment is below π/2.

    Raises:
        OutOfDomain: if the probe disk leaves the domain
        DegenerateLoop: if a loop sample maps within gap_tol of f(z)
        Unresolved: if more than 2^16 samples would be needed
    """
    z = complex(z)
    fz = planar_map.evaluate(z)
    n = max(int(samples), MIN_SAMPLES)
    previous: Optional[int] = None
    while n <= MAX_SAMPLES:
        loop = z + rho * np.exp(2j * np.pi * np.arange(n) / n)
        if previous is None and not np.all(planar_map.domain.contains(loop)):
            raise OutOfDomain(
                f"Probe disk B({z}, {rho}) leaves the domain of {planar_map.label}",
                {"point": [z.real, z.imag], "rho": rho},
            )
        values = planar_map.evaluate_array(loop) - fz
        gap = float(np.abs(values).min())
        if gap < gap_tol:
            raise DegenerateLoop(
                f"Probe loop of radius {rho} around {z} meets the fiber of f(z)",
                {"point": [z.real, z.imag], "rho": rho, "min_image_gap": gap},
            )
        increments = _winding_increments(values)
        estimate = int(round(increments.sum() / (2 * np.pi)))
        resolved = bool(np.abs(increments).max() < np.pi / 2)
        if resolved and previous == estimate:
            return LocalDegreeResult(z, float(rho), estimate, gap, n)
        previous = estimate if resolved else None
        n *= 2
    raise Unresolved(
        f"Winding around {z} at rho {rho} did not stabilise within {MAX_SAMPLES} samples",
        {"point": [z.real, z.imag], "rho": rho},
    )


def count_preimages(
    planar_map: PlanarMap, nd: NormalDomain, y: complex, margin: float = DEFAULT_MARGIN
) -> int:
    """
    Number of fiber clusters of y in the normal domain

    Raises:
        PreconditionFailed: if y is not inside B(f(center), r(1 - margin))
    """
    y = complex(y)
    if abs(y - nd.image_center) >= nd.radius * (1.0 - margin):
        raise PreconditionFailed(
            f"{y} is not inside B(f(x), {nd.radius * (1.0 - margin):.5f})",
            {"clause": "y inside f(U) with margin", "margin": margin},
        )
    count = len(components(nd.index.near_fiber(y)))
    if count == 0:
        logger.warning(f"No preimage cells of {y}; the normal domain evidence looks stale")
    return count


def cross_check_count(
    planar_map: PlanarMap, nd: NormalDomain, y: complex, tol: float, workers: int = 4
) -> Dict:
    """Compare count_preimages(y) with the number of ray lifts through y"""
    count = count_preimages(planar_map, nd, y)
    direction = complex(y) - nd.image_center
    lifts = enumerate_ray_lifts(planar_map, nd, direction if direction else 1, tol, workers=workers)
    return {"count": count, "ray_lifts": len(lifts), "agree": count == len(lifts)}


def degree_conservation_check(
    planar_map: PlanarMap, nd: NormalDomain, probe_count: int = 50, seed: int = 0
) -> ConservationReport:
    """
    Sample y in the annulus 0.05r < |y - f(x)| < 0.9r and compare preimage counts
    with the local degree at the center
    """
    boundary = region_boundary(nd.region)
    rho = 0.5 * float(np.abs(boundary - nd.center).min()) if len(boundary) else nd.radius
    degree: Optional[int]
    try:
        degree = local_degree(planar_map, nd.center, rho).degree
    except BranchCoverError as e:
        logger.warning(f"Local degree at {nd.center} unavailable: {e.message}")
        degree = None

    rng = np.random.default_rng(seed)
    inner, outer = 0.05 * nd.radius, 0.9 * nd.radius
    radii = np.sqrt(inner**2 + (outer**2 - inner**2) * rng.random(probe_count))
    angles = 2 * np.pi * rng.random(probe_count)
    probes = nd.image_center + radii * np.exp(1j * angles)
    counts = [count_preimages(planar_map, nd, y) for y in probes]

    report = ConservationReport(degree=degree, counts=counts, probes=probe_count)
    logger.info(
        f"Degree conservation at {nd.center}: degree {degree}, counts {report.histogram}"
    )
    return report


class BranchDetector:
    """
    Two-stage branch point search over a grid

    Stage one flags candidate cells with two derivative-free probes: a pair
    of supersamples mapping unusually close together, and a winding of f
    around the 3x3 block of the cell of at least two. Stage two refines each
    candidate cluster with local_degree and certifies an isolation radius.
    """

    def __init__(self, planar_map: PlanarMap, grid: Grid, search: Optional[Rect] = None, workers: int = 4):
        self.map = planar_map
        self.grid = grid
        self.search = search or grid.bounds
        self.workers = max(1, workers)
        self.h = grid.cell_size
        h = self.h
        side = np.arange(-3, 4) * (h / 2.0)
        top = side[::-1] + 1.5j * h
        loop = np.concatenate(
            [1.5 * h + 1j * side[:-1], top[:-1], -1.5 * h - 1j * side[:-1], side[:-1] - 1.5j * h]
        )
        self.block_loop = loop
        offsets = grid.supersample_offsets()
        self.pair_spacing = min(abs(a - b) for a, b in combinations(offsets, 2))

    def _probe_rows(self, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        grid = self.grid
        h = self.h
        centers = grid.row_centers(start, stop)
        offsets = grid.supersample_offsets()
        samples = self.map.evaluate_array(centers[..., None] + offsets)
        neighbours = self.map.evaluate_array(centers[..., None] + h * np.array([1, 1j]))
        jump = np.abs(neighbours - samples[..., :1]).max(axis=-1)
        # τ = L·s/4 for the smallest sample spacing s, so every pair is farther apart than 2τ/L
        stretch = jump / h
        tau = 0.25 * stretch * self.pair_spacing

        closest = np.full(centers.shape, np.inf)
        for i, j in combinations(range(len(offsets)), 2):
            np.minimum(closest, np.abs(samples[..., i] - samples[..., j]), out=closest)
        pair_flag = closest < tau

        values = self.map.evaluate_array(centers[..., None] + self.block_loop) - samples[..., :1]
        with np.errstate(divide="ignore", invalid="ignore"):
            increments = _winding_increments(values)
        degenerate = (np.abs(values) == 0).any(axis=-1)
        winding = np.rint(increments.sum(axis=-1) / (2 * np.pi))
        unresolved = np.abs(increments).max(axis=-1) >= np.pi / 2
        winding_flag = degenerate | unresolved | (np.abs(winding) >= 2)
        return pair_flag, winding_flag, closest

    def candidate_cells(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Boolean masks of pair-probe and winding-probe candidates, plus the pair gaps"""
        grid = self.grid
        pair = np.zeros(grid.shape, dtype=bool)
        winding = np.zeros(grid.shape, dtype=bool)
        gaps = np.zeros(grid.shape)
        for start in range(0, grid.ny, ROWS_PER_CHUNK):
            stop = min(start + ROWS_PER_CHUNK, grid.ny)
            pair[start:stop], winding[start:stop], gaps[start:stop] = self._probe_rows(start, stop)
        inside = self.search.contains(grid.row_centers(0, grid.ny))
        return pair & inside, winding & inside, gaps

    def _locate(self, rows: np.ndarray, cols: np.ndarray, winding: np.ndarray, gaps: np.ndarray) -> Tuple[complex, float]:
        centers = self.grid.centers_of(rows, cols)
        flagged = winding[rows, cols]
        if flagged.any():
            location = complex(centers[flagged].mean())
        else:
            location = complex(centers[int(np.argmin(gaps[rows, cols]))])
        spread = float(np.abs(centers - location).max())
        return location, spread

    def _degree(self, location: complex, spread: float) -> Optional[LocalDegreeResult]:
        rho = max(spread + 2 * self.h, 4 * self.h)
        while rho >= self.h:
            try:
                return local_degree(self.map, location, rho)
            except (DegenerateLoop, Unresolved) as e:
                logger.debug(f"Degree probe at {location} rho {rho:.4f} failed: {e.code}")
                rho /= 2.0
            except OutOfDomain:
                logger.warning(f"Candidate at {location} is too close to the domain edge")
                return None
        return None

    def _isolation_radius(self, location: complex, cap: float) -> float:
        radius = 4 * self.h
        best = 0.0
        while radius <= cap:
            probes = location + 0.75 * radius * np.exp(
                2j * np.pi * np.arange(ISOLATION_PROBES) / ISOLATION_PROBES
            )
            try:
                ok = all(
                    abs(local_degree(self.map, p, 0.2 * radius).degree) == 1 for p in probes
                )
            except BranchCoverError:
                ok = False
            if not ok:
                break
            best = radius
            radius *= 2.0
        if best == 0.0:
            logger.warning(f"No punctured annulus around {location} certified degree-1 behaviour")
            best = min(2 * self.h, cap)
        return best

    def _room(self, location: complex) -> float:
        """Largest R with the isolation probes inside the domain"""
        outer = self.map.domain.bounding_rect()
        if not bool(outer.contains(location)):
            return 0.0
        return outer.distance_to_edge(location) / 0.95

    def detect(self) -> BranchReport:
        pair, winding, gaps = self.candidate_cells()
        labels, count = label_cells(pair | winding)
        logger.info(f"Branch search: {count} candidate cluster(s) on a {self.grid.nx}x{self.grid.ny} grid")
        located = []
        for k, box in enumerate(ndimage.find_objects(labels), start=1):
            rows, cols = np.nonzero(labels[box] == k)
            located.append(
                self._locate(rows + box[0].start, cols + box[1].start, winding, gaps)
            )
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            degrees = list(pool.map(lambda item: self._degree(*item), located))

        found: List[Tuple[complex, int]] = []
        for (location, _), result in zip(located, degrees):
            if result is not None and abs(result.degree) >= 2:
                found.append((location, result.degree))
            elif result is not None:
                logger.debug(f"Dismissed candidate at {location}: degree {result.degree}")

        for (a, _), (b, _) in combinations(found, 2):
            if abs(a - b) < 4 * self.h:
                raise NonIsolatedBranch(
                    f"Branch candidates {a} and {b} cannot be separated at cell size {self.h}",
                    {"points": [[a.real, a.imag], [b.real, b.imag]], "cell_size": self.h},
                )

        caps = []
        for i, (location, _) in enumerate(found):
            others = [abs(location - other) for j, (other, _) in enumerate(found) if j != i]
            cap = min([0.49 * d for d in others] + [self._room(location), self.search.width, self.search.height])
            caps.append(cap)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            radii = list(pool.map(lambda item: self._isolation_radius(*item), zip([p for p, _ in found], caps)))

        points = [
            BranchPoint(location, degree, radius)
            for (location, degree), radius in zip(found, radii)
        ]
        for p in points:
            logger.info(
                f"Branch point at {p.location:.4f}, degree {p.degree}, isolation radius {p.isolation_radius:.4f}"
            )
        return BranchReport(self.search, points, self.h, candidate_clusters=count)


def detect_branch_points(
    planar_map: PlanarMap, search: Rect, grid: Grid, workers: int = 4
) -> BranchReport:
    """
    Detect and isolate branch points of the map inside `search`

    Args:
        planar_map: The map
        search: Search rectangle, compactly inside the domain
        grid: Grid covering the search rectangle
        workers: Threads for per-candidate refinement

    Returns:
        BranchReport

    Raises:
        NonIsolatedBranch: if two branch points lie within 4 cells of each other
    """
    return BranchDetector(planar_map, grid, search, workers).detect()
