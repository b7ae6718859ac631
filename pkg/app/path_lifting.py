#!/usr/bin/env python3
"""
Path lifting for branchcover
Subdivision construction of lifts, the diameter modulus, lift uniqueness and ray-lift enumeration
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from errors import (
    ChainBroken,
    InfiniteLiftSuspect,
    ModulusNotFound,
    PreconditionFailed,
    ToleranceNotMet,
)
from normal_domain import NormalDomain, fiber_points, polish_preimages
from planar_map import PlanarMap, Rect
from region import (
    FOUR_CONNECTED,
    CellSet,
    Polyline,
    components,
    points_diameter,
)

logger = logging.getLogger(__name__)

MAX_INTERVALS = 2**14
MAX_LEVELS = 40
STAGNATION_RATIO = 0.9
MODULUS_BISECTIONS = 4
SEED_PROBES = 8
RAY_SPLITS = (1 / 64, 1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2)
DEFAULT_MAX_LIFTS = 64


@dataclass(frozen=True, eq=False)
class LiftResult:
    """A lift α of β with the measured residual max |f(α(t)) - β(t)| on the common params"""

    lift: Polyline
    target: Polyline
    sup_error: float
    levels_used: int
    intervals: int = 0
    domain: Optional[NormalDomain] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        return {
            "lift": self.lift.to_dict(),
            "target": self.target.to_dict(),
            "sup_error": self.sup_error,
            "levels_used": self.levels_used,
            "intervals": self.intervals,
            "start": [self.lift.start.real, self.lift.start.imag],
            "end": [self.lift.end.real, self.lift.end.imag],
        }


@dataclass(frozen=True, eq=False)
class ComponentChain:
    """Chained components C(σ) of one subdivision level, as sorted flat cell indices"""

    level: int
    intervals: int
    tube_radius: float
    components: List[np.ndarray] = field(repr=False)
    diameters: np.ndarray = field(repr=False)

    @property
    def max_diameter(self) -> float:
        return float(self.diameters.max())


@dataclass(frozen=True)
class UniquenessVerdict:
    unique: bool
    max_separation: float
    witness_param: float

    def __bool__(self) -> bool:
        return self.unique

    def to_dict(self) -> Dict:
        return {
            "unique": self.unique,
            "max_separation": self.max_separation,
            "witness_param": self.witness_param,
        }


class _LocalLabels:
    """4-connected labels of a cell set cropped to its bounding box (plus a margin)"""

    def __init__(self, flat_ids: np.ndarray, nx: int, shape: Tuple[int, int]):
        rows, cols = np.divmod(flat_ids, nx)
        self.nx = nx
        self.r0 = max(int(rows.min()) - 1, 0)
        self.c0 = max(int(cols.min()) - 1, 0)
        r1 = min(int(rows.max()) + 2, shape[0])
        c1 = min(int(cols.max()) + 2, shape[1])
        mask = np.zeros((r1 - self.r0, c1 - self.c0), dtype=bool)
        mask[rows - self.r0, cols - self.c0] = True
        self.labels, self.count = ndimage.label(mask, structure=FOUR_CONNECTED)

    def label_of(self, flat_ids: np.ndarray) -> np.ndarray:
        rows, cols = np.divmod(np.asarray(flat_ids), self.nx)
        lr, lc = rows - self.r0, cols - self.c0
        inside = (lr >= 0) & (lc >= 0) & (lr < self.labels.shape[0]) & (lc < self.labels.shape[1])
        out = np.zeros(len(lr), dtype=int)
        out[inside] = self.labels[lr[inside], lc[inside]]
        return out

    def touching(self, flat_ids: np.ndarray) -> np.ndarray:
        """Labels of components intersecting or edge-adjacent to the given cells"""
        rows, cols = np.divmod(np.asarray(flat_ids), self.nx)
        found = []
        for dr, dc in ((0, 0), (0, 1), (1, 0), (0, -1), (-1, 0)):
            lr, lc = rows + dr - self.r0, cols + dc - self.c0
            inside = (lr >= 0) & (lc >= 0) & (lr < self.labels.shape[0]) & (lc < self.labels.shape[1])
            found.append(self.labels[lr[inside], lc[inside]])
        found = np.unique(np.concatenate(found))
        return found[found > 0]

    def members(self, label: int) -> np.ndarray:
        lr, lc = np.nonzero(self.labels == label)
        return np.sort((lr + self.r0) * self.nx + (lc + self.c0))


def _component_diameter(nd: NormalDomain, flat_ids: np.ndarray) -> float:
    rows, cols = np.divmod(flat_ids, nd.grid.nx)
    return points_diameter(nd.grid.centers_of(rows, cols)) + math.sqrt(2.0) * nd.grid.cell_size


def _check_path_inside(nd: NormalDomain, beta: Polyline, clause: str = "beta") -> None:
    samples = np.concatenate([beta.vertices, beta.at(np.linspace(0.0, 1.0, 257))])
    excess = np.abs(samples - nd.image_center).max() - nd.radius
    if excess > 1e-12 * (1.0 + nd.radius):
        raise PreconditionFailed(
            f"{clause} leaves the image disk B(f(x), {nd.radius})",
            {"clause": f"{clause} inside f(U)", "excess": float(excess)},
        )


class PathLifter:
    """
    Subdivision construction of a lift of β through a normal domain

    Each level n uses dyadic intervals of [0, 1]; every interval σ gets the
    component C(σ) of the region's preimage of a tube around β(σ) that meets
    the previous component. Levels refine until the components are small,
    then α is read off the junctions of the final chain and polished.
    """

    def __init__(self, planar_map: PlanarMap, nd: NormalDomain, beta: Polyline, x0: complex, tol: float):
        self.map = planar_map
        self.nd = nd
        self.beta = beta
        self.x0 = complex(x0)
        self.tol = tol
        self.grid = nd.grid
        self.index = nd.index
        h = self.grid.cell_size
        self.start_offset = abs(planar_map.evaluate(self.x0) - beta.start)
        self.floor_radius = nd.fiber_tol + self.start_offset
        self.target_diameter = max(tol / 2.0, 8.0 * h)
        self.start_cell = self.grid.flat_index(self.grid.cell_of(self.x0))

    def check_preconditions(self) -> None:
        if self.grid.cell_of(self.x0) not in self.nd.region:
            raise PreconditionFailed(
                f"Start point {self.x0} is not in the normal domain region",
                {"clause": "x0 in region"},
            )
        if self.start_offset > self.tol:
            raise PreconditionFailed(
                f"|f(x0) - beta(0)| = {self.start_offset:.3e} exceeds tol {self.tol}",
                {"clause": "f(x0) = beta(0)", "offset": self.start_offset},
            )
        _check_path_inside(self.nd, self.beta)

    def tube_radius(self, level: int) -> float:
        return max(self.floor_radius, 2.0 ** (-level) * self.nd.radius / 4.0)

    def initial_intervals(self) -> int:
        """Smallest power of two whose intervals have β-pieces shorter than the level-1 modulus"""
        epsilon = 0.5 * self.nd.region.diameter
        try:
            delta = lift_modulus(self.map, self.nd, epsilon, probes=SEED_PROBES)
        except ModulusNotFound:
            logger.debug("No level-1 modulus at this resolution, starting from one interval")
            return 1
        n = 1
        while n < MAX_INTERVALS and self._max_piece_length(n) >= delta:
            n *= 2
        return n

    def _max_piece_length(self, n: int) -> float:
        return max(
            Polyline.through(self.beta.trace(k / n, (k + 1) / n)).length() for k in range(n)
        )

    def _anchor(self, component: np.ndarray, t: float) -> int:
        """Cell of `component` whose center image is nearest β(t) (smallest index on ties)"""
        images = self.index.center_images_of(component)
        return int(component[int(np.argmin(np.abs(images - self.beta.at(t))))])

    def build_chain(self, level: int, n: int) -> ComponentChain:
        radius = self.tube_radius(level)
        grid = self.grid
        chain: List[np.ndarray] = []

        for k in range(n):
            trace = self.beta.trace(k / n, (k + 1) / n)
            ids = self.index.cell_ids_near_polyline(trace, radius)
            if k == 0:
                ids = np.union1d(ids, [self.start_cell])
            if len(ids) == 0:
                raise ChainBroken(
                    f"Tube around beta on interval {k}/{n} has no preimage cells",
                    {"level": level, "interval": k, "intervals": n},
                )
            local = _LocalLabels(ids, grid.nx, grid.shape)

            if k == 0:
                chosen = int(local.label_of(np.array([self.start_cell]))[0])
            else:
                candidates = local.touching(chain[-1])
                if len(candidates) == 0:
                    raise ChainBroken(
                        f"No component over interval {k}/{n} meets the previous one",
                        {"level": level, "interval": k, "intervals": n, "tube_radius": radius},
                    )
                anchor = grid.center(divmod(self._anchor(chain[-1], k / n), grid.nx))
                best_key: Optional[Tuple[float, int]] = None
                chosen = int(candidates[0])
                for label in candidates:
                    members = local.members(int(label))
                    rows, cols = np.divmod(members, grid.nx)
                    distances = np.abs(grid.centers_of(rows, cols) - anchor)
                    nearest = int(np.argmin(distances))
                    key = (float(distances[nearest]), int(members[nearest]))
                    if best_key is None or key < best_key:
                        best_key, chosen = key, int(label)
            chain.append(local.members(chosen))

        diameters = np.array([_component_diameter(self.nd, c) for c in chain])
        return ComponentChain(level, n, radius, chain, diameters)

    @staticmethod
    def check_nesting(coarse: ComponentChain, fine: ComponentChain) -> None:
        ratio = fine.intervals // coarse.intervals
        for k, component in enumerate(fine.components):
            parent = coarse.components[k // ratio]
            if len(np.intersect1d(component, parent, assume_unique=True)) == 0:
                raise ChainBroken(
                    f"Level {fine.level} component {k} does not meet its level {coarse.level} parent",
                    {"level": fine.level, "interval": k, "intervals": fine.intervals},
                )

    def refine(self) -> ComponentChain:
        """Run the levels until, at the floor tube radius, diameters reach the target or stagnate"""
        n = self.initial_intervals()
        diameter = self.nd.region.diameter
        previous: Optional[ComponentChain] = None

        for level in range(1, MAX_LEVELS + 1):
            budget = max(2.0 ** (-level) * diameter, self.target_diameter)
            at_floor = self.tube_radius(level) <= self.floor_radius
            stagnated = False
            last_max: Optional[float] = None
            while True:
                chain = self.build_chain(level, n)
                if chain.max_diameter < budget:
                    break
                if last_max is not None and chain.max_diameter > STAGNATION_RATIO * last_max:
                    logger.debug(
                        f"Level {level}: component diameters stagnate at {chain.max_diameter:.4f}"
                    )
                    stagnated = True
                    break
                if 2 * n > MAX_INTERVALS:
                    raise ToleranceNotMet(
                        f"Component diameters still {chain.max_diameter:.4f} at {n} intervals",
                        {"level": level, "intervals": n, "budget": budget},
                    )
                last_max = chain.max_diameter
                n *= 2

            if previous is not None:
                self.check_nesting(previous, chain)
            previous = chain
            logger.debug(
                f"Level {level}: {n} intervals, tube {chain.tube_radius:.2e}, "
                f"max diameter {chain.max_diameter:.4f} (budget {budget:.4f})"
            )
            # only the floor tube separates nearby branches
            if at_floor and (stagnated or budget <= self.target_diameter):
                return chain
        return previous

    def read_lift(self, chain: ComponentChain) -> Tuple[np.ndarray, np.ndarray]:
        """Junction cells of the chain, polished onto β at the interval endpoints"""
        n = chain.intervals
        params = np.arange(n + 1) / n
        starts = np.empty(n, dtype=complex)
        for k in range(1, n + 1):
            junction = chain.components[k - 1]
            if k < n:
                shared = np.intersect1d(junction, chain.components[k], assume_unique=True)
                junction = shared if len(shared) else np.union1d(junction, chain.components[k])
            cell = self._anchor(junction, params[k])
            starts[k - 1] = self.grid.center(divmod(cell, self.grid.nx))
        targets = self.beta.at(params[1:])
        polished = polish_preimages(self.map, starts, targets, 1.5 * self.grid.cell_size)
        return params, np.concatenate([[self.x0], polished])

    def run(self) -> LiftResult:
        self.check_preconditions()
        chain = self.refine()
        params, nodes = self.read_lift(chain)
        target = self.beta.resample(params)
        sup_error = float(np.abs(self.map.evaluate_array(nodes) - target.vertices).max())
        if sup_error > self.tol:
            raise ToleranceNotMet(
                f"Lift residual {sup_error:.3e} exceeds tol {self.tol}",
                {"sup_error": sup_error, "level": chain.level, "intervals": chain.intervals},
            )
        logger.info(
            f"Lifted path in {chain.level} levels ({chain.intervals} intervals), "
            f"sup_error {sup_error:.2e}"
        )
        return LiftResult(
            lift=Polyline(nodes, params),
            target=target,
            sup_error=sup_error,
            levels_used=chain.level,
            intervals=chain.intervals,
            domain=self.nd,
        )


def lift_path(
    planar_map: PlanarMap, nd: NormalDomain, beta: Polyline, x0: complex, tol: float
) -> LiftResult:
    """
    Lift β through the normal domain starting at x0

    Args:
        planar_map: The map
        nd: Verified normal domain containing x0
        beta: Target path inside f(U)
        x0: Start point with |f(x0) - β(0)| <= tol
        tol: Required max |f(α(t)) - β(t)| on the parameter grid

    Returns:
        LiftResult

    Raises:
        PreconditionFailed, ChainBroken, ToleranceNotMet
    """
    return PathLifter(planar_map, nd, beta, x0, tol).run()


def _probe_family(
    rng: np.random.Generator, center: complex, room: float, delta: float, count: int
) -> List[np.ndarray]:
    probes: List[np.ndarray] = []
    for kind in ("segment", "arc"):
        radii = room * np.sqrt(rng.random(count))
        angles = 2 * np.pi * rng.random(count)
        headings = 2 * np.pi * rng.random(count)
        for rad, ang, head in zip(radii, angles, headings):
            mid = center + rad * np.exp(1j * ang)
            if kind == "segment":
                offset = 0.5 * delta * np.exp(1j * head)
                probes.append(np.array([mid - offset, mid + offset]))
            else:
                theta = head + np.linspace(0.0, np.pi, 9)
                probes.append(mid + 0.5 * delta * np.exp(1j * theta))
    return probes


def _probes_pass(
    nd: NormalDomain, probes: List[np.ndarray], tube: float, epsilon: float
) -> bool:
    for probe in probes:
        ids = nd.index.cell_ids_near_polyline(probe, tube)
        if len(ids) == 0:
            continue
        local = _LocalLabels(ids, nd.grid.nx, nd.grid.shape)
        for label in range(1, local.count + 1):
            rows, cols = np.divmod(local.members(label), nd.grid.nx)
            if points_diameter(nd.grid.centers_of(rows, cols)) >= epsilon:
                return False
    return True


def lift_modulus(
    planar_map: PlanarMap,
    nd: NormalDomain,
    epsilon: float,
    probes: int = 200,
    seed: int = 0,
) -> float:
    """
    Empirical modulus δ(ε): probe continua of diameter δ pull back to pieces smaller than ε

    δ is halved from the domain radius until a family of random segments and
    arcs passes, then bisected against the last failing value. Each probe is
    pulled back through a tube of the fiber tolerance, the narrowest tube whose
    cells stay edge-connected along a continuum, and the pieces are measured by
    their cell centers. Each trial draws its probes from a generator seeded by
    (seed, trial).

    Raises:
        ModulusNotFound: if ε is below grid resolution or δ underflows the fiber tolerance
    """
    h = nd.grid.cell_size
    if epsilon <= 2.0 * math.sqrt(2.0) * h:
        raise ModulusNotFound(
            f"epsilon {epsilon} is not resolvable at cell size {h}",
            {"epsilon": epsilon, "cell_size": h},
        )

    trial = 0

    def passes(delta: float) -> bool:
        nonlocal trial
        rng = np.random.default_rng((seed, trial))
        trial += 1
        room = max(nd.radius - 0.5 * delta - nd.fiber_tol, 0.0)
        family = _probe_family(rng, nd.image_center, room, delta, probes)
        return _probes_pass(nd, family, nd.fiber_tol, epsilon)

    delta = nd.radius
    failed: Optional[float] = None
    while not passes(delta):
        failed = delta
        delta /= 2.0
        if delta < nd.fiber_tol:
            raise ModulusNotFound(
                f"Modulus underflowed the grid for epsilon {epsilon}",
                {"epsilon": epsilon, "delta": delta, "fiber_tol": nd.fiber_tol},
            )
    if failed is not None:
        low, high = delta, failed
        for _ in range(MODULUS_BISECTIONS):
            mid = 0.5 * (low + high)
            if passes(mid):
                low = mid
            else:
                high = mid
        delta = low
    logger.debug(f"Lift modulus for epsilon {epsilon:.4f}: delta {delta:.5f}")
    return delta


def _arc_length_reparam(planar_map: PlanarMap, alpha: Polyline) -> Polyline:
    images = planar_map.evaluate_array(alpha.vertices)
    steps = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(images)))])
    if steps[-1] <= 0:
        return alpha
    params = steps / steps[-1]
    params[-1] = 1.0
    return Polyline(alpha.vertices, params)


def assert_unique_lift(
    planar_map: PlanarMap,
    simply_connected_bounds: Rect,
    alpha1: Polyline,
    alpha2: Polyline,
    tol: float,
) -> UniquenessVerdict:
    """
    Compare two lifts of the same arc with the same endpoints

    Both lifts are reparametrised by normalised arc length of their image
    paths and resampled on the union of their parameters.

    Returns:
        UniquenessVerdict, truthy iff the sup-distance is below 3*tol

    Raises:
        PreconditionFailed: naming the violated clause
    """
    for name, alpha in (("alpha1", alpha1), ("alpha2", alpha2)):
        if not np.all(simply_connected_bounds.contains(alpha.vertices)):
            raise PreconditionFailed(
                f"{name} leaves the simply connected bounds",
                {"clause": "lifts inside bounds", "lift": name},
            )
    for label, a, b in (("start", alpha1.start, alpha2.start), ("end", alpha1.end, alpha2.end)):
        if abs(a - b) > tol:
            raise PreconditionFailed(
                f"Lift {label} points differ by {abs(a - b):.3e}",
                {"clause": f"{label} points agree", "distance": abs(a - b)},
            )

    first = _arc_length_reparam(planar_map, alpha1)
    second = _arc_length_reparam(planar_map, alpha2)
    params = np.union1d(first.params, second.params)
    points1, points2 = first.at(params), second.at(params)

    image_gap = float(
        np.abs(planar_map.evaluate_array(points1) - planar_map.evaluate_array(points2)).max()
    )
    # each lift is within tol of the common target
    if image_gap > 2.0 * tol:
        raise PreconditionFailed(
            f"Image paths of the lifts differ by {image_gap:.3e}",
            {"clause": "same image path", "distance": image_gap},
        )

    separation = np.abs(points1 - points2)
    worst = int(np.argmax(separation))
    verdict = UniquenessVerdict(
        unique=bool(separation[worst] < 3.0 * tol),
        max_separation=float(separation[worst]),
        witness_param=float(params[worst]),
    )
    if not verdict.unique:
        logger.warning(
            f"Lifts separate by {verdict.max_separation:.3e} at t={verdict.witness_param:.4f}"
        )
    return verdict


def _sup_distance(a: Polyline, b: Polyline) -> float:
    params = np.union1d(a.params, b.params)
    return float(np.abs(a.at(params) - b.at(params)).max())


def _best_point(planar_map: PlanarMap, cells: CellSet, y: complex) -> complex:
    centers = cells.centers()
    values = planar_map.evaluate_array(centers)
    start = centers[int(np.argmin(np.abs(values - y)))]
    polished = polish_preimages(
        planar_map, np.array([start]), np.array([y]), 1.5 * cells.grid.cell_size
    )
    return complex(polished[0])


def _ray_split(nd: NormalDomain, ray: Polyline) -> Tuple[float, List[CellSet], List[CellSet]]:
    """Smallest split parameter whose fiber clusters separate from those of f(x)"""
    index = nd.index
    start_near = index.near_fiber(ray.start)
    start_clusters = components(start_near)
    guard = ndimage.binary_dilation(start_near.mask, structure=FOUR_CONNECTED)
    for s in RAY_SPLITS:
        if abs(ray.at(s) - ray.start) < 4.0 * nd.fiber_tol:
            continue
        near = index.near_fiber(ray.at(s))
        if not near.is_empty() and not (near.mask & guard).any():
            return s, start_clusters, components(near)
    raise PreconditionFailed(
        "Ray fiber does not separate from the fiber of f(x) at this resolution",
        {"clause": "ray fiber separation", "fiber_tol": nd.fiber_tol},
    )


def enumerate_ray_lifts(
    planar_map: PlanarMap,
    nd: NormalDomain,
    direction: complex,
    tol: float,
    max_lifts: int = DEFAULT_MAX_LIFTS,
    workers: int = 4,
) -> List[LiftResult]:
    """
    All lifts of the ray t -> f(x) + t·r·(1 - tol)·direction from the fiber clusters of f(x)

    The ray is split at a small s: the head [0, s] links each fiber cluster of
    f(x) to the fiber clusters of β(s) it can reach, and each tail [s, 1] is
    lifted with lift_path. Lifts closer than 3 cells are merged.

    Raises:
        InfiniteLiftSuspect: if more than `max_lifts` distinct lifts are produced
    """
    if direction == 0:
        raise PreconditionFailed("Ray direction must be nonzero", {"clause": "direction != 0"})
    unit = complex(direction) / abs(direction)
    fx = nd.image_center
    ray = Polyline.segment(fx, fx + nd.radius * (1.0 - tol) * unit)
    h = nd.grid.cell_size
    index = nd.index

    s, start_clusters, split_clusters = _ray_split(nd, ray)
    head = index.cells_near_polyline(ray.trace(0.0, s), nd.fiber_tol)
    head_labels, _ = ndimage.label(head.mask | _union(start_clusters, nd), structure=FOUR_CONNECTED)

    center_cell = nd.center_cell
    jobs: List[Tuple[complex, complex]] = []
    for cluster in start_clusters:
        if center_cell in cluster:
            origin = nd.center
        else:
            origin = _best_point(planar_map, cluster, fx)
        cluster_labels = np.unique(head_labels[cluster.mask])
        for split in split_clusters:
            if np.intersect1d(np.unique(head_labels[split.mask]), cluster_labels).size:
                jobs.append((origin, _best_point(planar_map, split, ray.at(s))))
    logger.info(
        f"Ray split at s={s}: {len(start_clusters)} start cluster(s), "
        f"{len(split_clusters)} split cluster(s), {len(jobs)} tail(s)"
    )
    if len(jobs) > max_lifts:
        raise InfiniteLiftSuspect(
            f"{len(jobs)} ray-lift tails exceed the cap of {max_lifts}",
            {"tails": len(jobs), "max_lifts": max_lifts},
        )

    tail = Polyline.segment(ray.at(s), ray.end)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(lift_path, planar_map, nd, tail, start, tol) for _, start in jobs]
        tails = [f.result() for f in futures]

    lifts: List[LiftResult] = []
    for (origin, _), piece in zip(jobs, tails):
        params = np.concatenate([[0.0], s + (1.0 - s) * piece.lift.params])
        vertices = np.concatenate([[origin], piece.lift.vertices])
        lift = Polyline(vertices, params)
        target = ray.resample(params)
        sup_error = max(piece.sup_error, abs(planar_map.evaluate(origin) - fx))
        candidate = LiftResult(lift, target, sup_error, piece.levels_used, piece.intervals, nd)
        if any(_sup_distance(lift, kept.lift) < 3.0 * h for kept in lifts):
            continue
        lifts.append(candidate)
        if len(lifts) > max_lifts:
            raise InfiniteLiftSuspect(
                f"Ray-lift enumeration exceeded {max_lifts} distinct lifts",
                {"max_lifts": max_lifts},
            )
    logger.info(f"Found {len(lifts)} distinct ray lift(s) in direction {unit}")
    return lifts


def _union(clusters: List[CellSet], nd: NormalDomain) -> np.ndarray:
    mask = np.zeros(nd.grid.shape, dtype=bool)
    for cluster in clusters:
        mask |= cluster.mask
    return mask


def concatenate_lifts(first: LiftResult, second: LiftResult, tol: float) -> LiftResult:
    """Join two lifts end to start; the first occupies params [0, 1/2]"""
    gap = abs(first.lift.end - second.lift.start)
    if gap > tol:
        raise PreconditionFailed(
            f"Lifts do not join: gap {gap:.3e}",
            {"clause": "first end = second start", "distance": gap},
        )
    params = np.concatenate([0.5 * first.lift.params, 0.5 + 0.5 * second.lift.params[1:]])
    lift = Polyline(np.concatenate([first.lift.vertices, second.lift.vertices[1:]]), params)
    target = Polyline(
        np.concatenate([first.target.vertices, second.target.vertices[1:]]), params
    )
    return LiftResult(
        lift=lift,
        target=target,
        sup_error=max(first.sup_error, second.sup_error),
        levels_used=max(first.levels_used, second.levels_used),
        intervals=first.intervals + second.intervals,
        domain=first.domain,
    )


@dataclass(frozen=True, eq=False)
class IsolationCertificate:
    """Result of lifting a nearby fiber back through a point b and on to the center"""

    point: complex
    probe_value: complex
    local_fiber: List[complex]
    lifts: List[LiftResult] = field(repr=False)
    branch_free: bool
    failures: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "point": [self.point.real, self.point.imag],
            "probe_value": [self.probe_value.real, self.probe_value.imag],
            "local_fiber": [[p.real, p.imag] for p in self.local_fiber],
            "lift_ends": [[lf.lift.end.real, lf.lift.end.imag] for lf in self.lifts],
            "branch_free": self.branch_free,
            "failures": list(self.failures),
        }


def certify_branch_isolation(
    planar_map: PlanarMap, nd: NormalDomain, b: complex, tol: float, offset: Optional[float] = None
) -> IsolationCertificate:
    """
    Check that a non-center point b of a normal neighbourhood is not branched

    A value y0 near f(b) is chosen; its fiber points close to b are lifted
    along [y0, f(b)] and then along [f(b), f(x)]. If b were branched, two
    distinct lifts would reach b and continue to the center, so lifts of
    arcs with common endpoints would disagree.

    The point counts as branch-free only when y0 has exactly one fiber point
    near b, f(b) has exactly one fiber point near b and it sits on b, the
    lifted fiber points are pairwise separated, and every first-leg lift ends
    on that fiber point of f(b).
    """
    b = complex(b)
    h = nd.grid.cell_size
    if abs(b - nd.center) < 4.0 * h:
        raise PreconditionFailed("b must differ from the center", {"clause": "b != center"})
    fb = planar_map.evaluate(b)
    room = nd.radius - abs(fb - nd.image_center)
    step = offset or min(6.0 * nd.fiber_tol, 0.25 * room)
    if step <= nd.fiber_tol or room <= 0:
        raise PreconditionFailed(
            "f(b) is too close to the edge of f(U) to probe around it",
            {"clause": "f(b) interior", "room": room},
        )
    direction = (fb - nd.image_center) / abs(fb - nd.image_center) if fb != nd.image_center else 1
    y0 = fb - step * direction
    reach = 0.5 * abs(b - nd.center)
    match = 3.0 * h

    local = [p for p in fiber_points(planar_map, nd, y0) if abs(p - b) < reach]
    anchors = [q for q in fiber_points(planar_map, nd, fb) if abs(q - b) < reach]
    failures: List[str] = []
    if len(local) != 1:
        failures.append(f"{len(local)} fiber points of y0 near b")
    if len(anchors) != 1 or abs(anchors[0] - b) > match:
        failures.append(f"{len(anchors)} fiber points of f(b) near b, none within {match:.3g} of b")
    if any(abs(p - q) <= 2.0 * h for i, p in enumerate(local) for q in local[i + 1 :]):
        failures.append("fiber points of y0 closer than two cells")

    lifts: List[LiftResult] = []
    for p in local:
        first = lift_path(planar_map, nd, Polyline.segment(y0, fb), p, tol)
        gaps = [abs(first.lift.end - q) for q in anchors]
        if not gaps or min(gaps) > match:
            failures.append(f"lift from {p} ends at {first.lift.end}, off the fiber of f(b)")
            lifts.append(first)
            continue
        second = lift_path(planar_map, nd, Polyline.segment(fb, nd.image_center), first.lift.end, tol)
        lifts.append(concatenate_lifts(first, second, match))

    branch_free = not failures
    logger.info(
        f"Isolation check at {b}: {len(local)} local fiber point(s) of y0, "
        f"{'no branching' if branch_free else 'branching suspected: ' + '; '.join(failures)}"
    )
    return IsolationCertificate(b, y0, local, lifts, branch_free, failures)
