#!/usr/bin/env python3
"""
Power-map normal form for branchcover
Builds f|U = phi^-1 o (z -> z^k) o psi on a normal neighbourhood by k-th root continuation
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from branch_detector import local_degree
from errors import (
    MonodromyMismatch,
    PreconditionFailed,
    ResidualExceeded,
    VerificationFailed,
)
from normal_domain import (
    DEFAULT_BOUNDARY_FACTOR,
    DEFAULT_FILL_THRESHOLD,
    NormalDomain,
    center_fiber_cluster,
    establish_normal_domain,
)
from planar_map import PlanarMap
from region import FOUR_CONNECTED, NEIGHBOR_OFFSETS, Grid, region_boundary

logger = logging.getLogger(__name__)

RING_COUNT = 4
INJECTIVITY_SEPARATION_CELLS = 3.0
CENTER_PROBE_FRACTION = 0.05
BOUNDARY_PROBE_FRACTION = 0.05
CENTER_PROBE_CELLS = 3.0
INJECTIVITY_RETRIES = 2

# Lower-left corners of the four 2x2 blocks that contain a given cell
_BLOCK_SHIFTS = ((0, 0), (-1, 0), (0, -1), (-1, -1))


def _xy(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=complex).ravel()
    return np.column_stack([points.real, points.imag])


def _principal_root(u: np.ndarray, k: int) -> np.ndarray:
    return np.abs(u) ** (1.0 / k) * np.exp(1j * np.angle(u) / k)


def _nearest_root(u: np.ndarray, reference: np.ndarray, k: int) -> np.ndarray:
    """The k-th root of each u closest to the matching reference value"""
    theta = np.angle(u)
    j = np.round((k * np.angle(reference) - theta) / (2 * np.pi))
    return np.abs(u) ** (1.0 / k) * np.exp(1j * (theta + 2 * np.pi * j) / k)


@dataclass(frozen=True)
class RingObservation:
    """Root continuation once around a square ring of cells enclosing the center"""

    radius_cells: int
    cells: int
    winding: int
    applications: int
    expected: int
    closes: bool
    agrees: bool
    resolved: bool

    @property
    def consistent(self) -> bool:
        return self.resolved and self.closes and self.agrees and self.applications == self.expected

    def to_dict(self) -> Dict:
        return {
            "radius_cells": self.radius_cells,
            "cells": self.cells,
            "winding": self.winding,
            "applications": self.applications,
            "expected": self.expected,
            "closes": self.closes,
            "agrees": self.agrees,
            "resolved": self.resolved,
            "consistent": self.consistent,
        }


@dataclass(frozen=True, eq=False)
class NormalFormChart:
    """
    Sampled chart psi: U -> unit disk with phi(f(w)) = psi(w)^k

    `table` holds psi at the cell centers of the working grid (NaN outside
    the region); the center cell is pinned to 0 and stands for z itself.
    """

    nd: NormalDomain = field(repr=False)
    k: int
    degree: int
    orientation: int
    table: np.ndarray = field(repr=False)
    residual: float
    tol: float
    rings: List[RingObservation] = field(default_factory=list)
    injectivity_violations: int = 0
    puncture_modulus: float = 0.0

    @property
    def center(self) -> complex:
        return self.nd.center

    @property
    def radius(self) -> float:
        return self.nd.radius

    @property
    def deck_generator(self) -> complex:
        return complex(np.exp(2j * np.pi * self.orientation / self.k))

    @property
    def injective(self) -> bool:
        return self.injectivity_violations == 0

    def phi(self, y) -> np.ndarray:
        """Affine map of B(f(z), r) onto the unit disk"""
        return (np.asarray(y, dtype=complex) - self.nd.image_center) / self.nd.radius

    def phi_inverse(self, v) -> np.ndarray:
        return self.nd.image_center + self.nd.radius * np.asarray(v, dtype=complex)

    def _corner_values(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        grid = self.nd.grid
        values = np.full((4,) + rows.shape, np.nan, dtype=complex)
        for i, (dr, dc) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
            rr, cc = rows + dr, cols + dc
            inside = (rr >= 0) & (rr < grid.ny) & (cc >= 0) & (cc < grid.nx)
            values[i][inside] = self.table[rr[inside], cc[inside]]
        return values

    def psi(self, w) -> np.ndarray:
        """
        Evaluate psi at arbitrary points of the region

        Uses the bilinear patch of a complete 2x2 block of cell centers
        containing the point's cell, preferring the block of the point's
        quadrant; without a complete block the available corners are blended
        with renormalised weights. Points with no assigned corner give NaN.
        """
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        grid = self.nd.grid
        h = grid.cell_size
        fx = (w.real - grid.bounds.x0) / h - 0.5
        fy = (w.imag - grid.bounds.y0) / h - 0.5
        cell_rows, cell_cols = grid.cells_of(w)

        out = np.full(w.shape, np.nan, dtype=complex)
        pending = np.ones(w.shape, dtype=bool)
        natural_r, natural_c = np.floor(fy).astype(int), np.floor(fx).astype(int)
        candidates = [(natural_r, natural_c)] + [
            (cell_rows + dr, cell_cols + dc) for dr, dc in _BLOCK_SHIFTS
        ]
        for r0, c0 in candidates:
            if not pending.any():
                break
            idx = np.flatnonzero(pending)
            corners = self._corner_values(r0[idx], c0[idx])
            complete = ~np.isnan(corners).any(axis=0)
            if not complete.any():
                continue
            sel = idx[complete]
            tx = fx[sel] - c0[sel]
            ty = fy[sel] - r0[sel]
            v = corners[:, complete]
            out[sel] = (
                v[0] * (1 - tx) * (1 - ty) + v[1] * tx * (1 - ty) + v[2] * (1 - tx) * ty + v[3] * tx * ty
            )
            pending[sel] = False

        if pending.any():
            idx = np.flatnonzero(pending)
            r0, c0 = natural_r[idx], natural_c[idx]
            tx, ty = fx[idx] - c0, fy[idx] - r0
            corners = self._corner_values(r0, c0)
            weights = np.stack([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty])
            present = ~np.isnan(corners)
            total = np.where(present, weights * np.where(present, corners, 0), 0).sum(axis=0)
            weight = np.where(present, weights, 0).sum(axis=0)
            blended = np.full(idx.shape, np.nan, dtype=complex)
            np.divide(total, weight, out=blended, where=weight > 0)
            out[idx] = blended
        return out

    def compose(self, w) -> np.ndarray:
        """phi^-1(psi(w)^k), the factorised approximation of f"""
        return self.phi_inverse(self.psi(w) ** self.k)

    def to_dict(self, include_table: bool = False) -> Dict:
        gen = self.deck_generator
        data = {
            "center": [self.center.real, self.center.imag],
            "radius": self.radius,
            "k": self.k,
            "degree": self.degree,
            "orientation": self.orientation,
            "deck_generator": [gen.real, gen.imag],
            "residual": self.residual,
            "tol": self.tol,
            "injective": self.injective,
            "injectivity_violations": self.injectivity_violations,
            "puncture_modulus": self.puncture_modulus,
            "rings": [ring.to_dict() for ring in self.rings],
            "normal_domain": self.nd.to_dict(include_members=False),
        }
        if include_table:
            flat = np.flatnonzero(~np.isnan(self.table))
            values = self.table.flat[flat]
            data["table"] = {
                "grid": self.nd.grid.to_dict(),
                "cells": flat.tolist(),
                "psi": [[v.real, v.imag] for v in values],
            }
        return data


@dataclass(frozen=True)
class NormalFormReport:
    probes: int
    evaluated: int
    max_residual: float
    mean_residual: float
    tolerance: float
    injectivity_margin: float
    injective: bool
    boundary_deviation: float
    boundary_tolerance: float

    @property
    def within_tolerance(self) -> bool:
        return self.max_residual <= self.tolerance

    @property
    def boundary_ok(self) -> bool:
        return self.boundary_deviation <= self.boundary_tolerance

    @property
    def passed(self) -> bool:
        return self.within_tolerance and self.injective and self.boundary_ok

    def to_dict(self) -> Dict:
        return {
            "probes": self.probes,
            "evaluated": self.evaluated,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "tolerance": self.tolerance,
            "within_tolerance": self.within_tolerance,
            "injectivity_margin": self.injectivity_margin,
            "injective": self.injective,
            "boundary_deviation": self.boundary_deviation,
            "boundary_tolerance": self.boundary_tolerance,
            "boundary_ok": self.boundary_ok,
            "passed": self.passed,
        }


class _Frame:
    """Region bounding box padded by one cell, addressed by flat index"""

    def __init__(self, nd: NormalDomain):
        rows, cols = nd.region.cells()
        self.row0 = int(rows.min()) - 1
        self.col0 = int(cols.min()) - 1
        self.height = int(rows.max()) - self.row0 + 2
        self.width = int(cols.max()) - self.col0 + 2
        self.members = (rows - self.row0) * self.width + (cols - self.col0)
        self.steps = np.array([dr * self.width + dc for dr, dc in NEIGHBOR_OFFSETS])

    @property
    def size(self) -> int:
        return self.height * self.width

    def local(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return (np.asarray(rows) - self.row0) * self.width + (np.asarray(cols) - self.col0)

    def mask(self, flat: np.ndarray) -> np.ndarray:
        out = np.zeros(self.size, dtype=bool)
        out[flat] = True
        return out

    def embed(self, values: np.ndarray, grid: Grid) -> np.ndarray:
        table = np.full(grid.shape, np.nan, dtype=complex)
        table[self.row0: self.row0 + self.height, self.col0: self.col0 + self.width] = values.reshape(
            self.height, self.width
        )
        return table

    def ring(self, center: int, d: int) -> Optional[np.ndarray]:
        """Counterclockwise square ring at Chebyshev distance d, starting right of center"""
        row, col = divmod(center, self.width)
        if row - d < 0 or row + d >= self.height or col - d < 0 or col + d >= self.width:
            return None
        up, down = np.arange(d - 1, -d - 1, -1), np.arange(-d + 1, d + 1)
        dr = np.concatenate(
            [np.arange(0, d + 1), np.full(2 * d, d), up, np.full(2 * d, -d), np.arange(-d + 1, 0)]
        )
        dc = np.concatenate(
            [np.full(d + 1, d), up, np.full(2 * d, -d), down, np.full(d - 1, d)]
        )
        return center + dr * self.width + dc


def _continue_roots(
    u: np.ndarray, free: np.ndarray, base: int, k: int, steps: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Breadth-first k-th root continuation over the free cells from `base`"""
    psi = np.full(u.shape, np.nan, dtype=complex)
    assigned = np.zeros(u.shape, dtype=bool)
    psi[base] = _principal_root(u[base], k)
    assigned[base] = True
    frontier = np.array([base])
    while frontier.size:
        children, parents = [], []
        for step in steps:
            child = frontier + step
            ok = free[child] & ~assigned[child]
            children.append(child[ok])
            parents.append(frontier[ok])
        children_all = np.concatenate(children)
        if not children_all.size:
            break
        # first parent in neighbor order wins
        frontier, first = np.unique(children_all, return_index=True)
        psi[frontier] = _nearest_root(u[frontier], psi[np.concatenate(parents)[first]], k)
        assigned[frontier] = True
    return psi, assigned


def _fill_cluster(
    u: np.ndarray,
    psi: np.ndarray,
    assigned: np.ndarray,
    offsets: np.ndarray,
    cluster: np.ndarray,
    center: int,
    k: int,
    orientation: int,
    steps: np.ndarray,
) -> None:
    """
    Assign the central fiber cluster by modulus and direction

    |psi| = |u|^(1/k); the argument is orientation*theta plus the twist
    arg(psi) - orientation*theta of the assigned rim cells, interpolated
    over the direction theta seen from the center.
    """
    targets = cluster[cluster != center]
    if not targets.size:
        return
    rim = np.unique((cluster[:, None] + steps[None, :]).ravel())
    rim = rim[assigned[rim] & (rim != center)]
    rim = np.setdiff1d(rim, cluster)
    if not rim.size:
        logger.warning(f"Fiber cluster of {cluster.size} cells has no assigned rim")
        return
    rim_theta = np.angle(offsets[rim])
    twist = np.exp(1j * (np.angle(psi[rim]) - orientation * rim_theta))
    theta = np.angle(offsets[targets])
    re = np.interp(theta, rim_theta, twist.real, period=2 * np.pi)
    im = np.interp(theta, rim_theta, twist.imag, period=2 * np.pi)
    argument = orientation * theta + np.angle(re + 1j * im)
    psi[targets] = np.abs(u[targets]) ** (1.0 / k) * np.exp(1j * argument)
    assigned[targets] = True


def _fill_remaining(
    u: np.ndarray, psi: np.ndarray, assigned: np.ndarray, members: np.ndarray, k: int, steps: np.ndarray
) -> None:
    """Assign leftover region cells the root nearest the mean of assigned neighbours"""
    pending = np.zeros(u.shape, dtype=bool)
    pending[members] = True
    while True:
        todo = np.flatnonzero(pending & ~assigned)
        if not todo.size:
            return
        neighbours = todo[:, None] + steps[None, :]
        have = assigned[neighbours]
        ready = have.any(axis=1)
        if not ready.any():
            logger.warning(f"{todo.size} region cells have no assigned neighbour")
            return
        cells = todo[ready]
        total = np.where(have[ready], psi[neighbours[ready]], 0).sum(axis=1)
        reference = np.where(total != 0, total, 1.0)
        psi[cells] = _nearest_root(u[cells], reference, k)
        assigned[cells] = True


def _observe_ring(
    u: np.ndarray, psi: np.ndarray, ring: np.ndarray, d: int, k: int, orientation: int
) -> RingObservation:
    values = u[ring]
    increments = np.angle(np.roll(values, -1) / values)
    winding = int(round(float(increments.sum()) / (2 * np.pi)))
    resolved = bool(np.all(np.isfinite(increments)) and np.abs(increments).max() < np.pi)
    start = psi[ring[0]]
    cumulative = np.concatenate([[0.0], np.cumsum(increments[:-1])])
    continued = np.abs(values) ** (1.0 / k) * np.exp(1j * (np.angle(start) + cumulative / k))
    drift = np.abs(np.angle(continued / psi[ring]))
    agrees = bool(np.all(np.isfinite(drift)) and drift.max() < 0.5 * np.pi / k)
    return RingObservation(
        radius_cells=d,
        cells=len(ring),
        winding=winding,
        applications=winding * orientation,
        expected=k,
        closes=winding % k == 0,
        agrees=agrees,
        resolved=resolved,
    )


def _deck_rings(
    frame: _Frame, u: np.ndarray, psi: np.ndarray, free: np.ndarray, center: int, cluster: np.ndarray,
    k: int, orientation: int,
) -> List[RingObservation]:
    crow, ccol = divmod(center, frame.width)
    rows, cols = np.divmod(cluster, frame.width)
    inner = int(max(np.abs(rows - crow).max(), np.abs(cols - ccol).max())) if cluster.size else 0
    radii = []
    d = inner + 1
    while True:
        ring = frame.ring(center, d)
        if ring is None or not free[ring].all():
            break
        radii.append(d)
        d += 1
    if not radii:
        raise VerificationFailed(
            "No ring of cells separates the center fiber from the region boundary",
            {"cluster_radius_cells": inner},
        )
    chosen = np.unique(np.linspace(0, len(radii) - 1, min(RING_COUNT, len(radii))).round().astype(int))
    return [
        _observe_ring(u, psi, frame.ring(center, radii[i]), radii[i], k, orientation) for i in chosen
    ]


def _injectivity_violations(points: np.ndarray, values: np.ndarray, h: float, r: float) -> int:
    """Pairs of cells more than 3 cells apart whose psi values lie within h/r"""
    tree = cKDTree(_xy(values))
    pairs = tree.query_pairs(h / r, output_type="ndarray")
    if not len(pairs):
        return 0
    separation = np.abs(points[pairs[:, 0]] - points[pairs[:, 1]])
    return int(np.count_nonzero(separation > INJECTIVITY_SEPARATION_CELLS * h))


def build_normal_form(
    planar_map: PlanarMap,
    z: complex,
    grid: Grid,
    tol: float,
    radius: Optional[float] = None,
    k: Optional[int] = None,
    seed: int = 0,
    fill_threshold: float = DEFAULT_FILL_THRESHOLD,
    boundary_factor: float = DEFAULT_BOUNDARY_FACTOR,
) -> NormalFormChart:
    """
    Construct the normal-form chart of f at z

    A chart that fails grid-scale injectivity is rebuilt on a normal
    neighbourhood of half the radius, at most INJECTIVITY_RETRIES times.

    Args:
        planar_map: The map
        z: Center point
        grid: Working grid
        tol: Residual tolerance over the cell table
        radius: Starting radius for the normal neighbourhood search
        k: Root order to use instead of the measured |local degree|
        seed: Seed of the normal-domain fill sample
        fill_threshold: See build_normal_domain
        boundary_factor: See build_normal_domain

    Returns:
        NormalFormChart

    Raises:
        MonodromyMismatch: if the continued root does not follow the deck generator
        ResidualExceeded: if the cell residual is above tol
        VerificationFailed: if psi is still not injective after the retries
    """
    z = complex(z)
    for attempt in range(INJECTIVITY_RETRIES + 1):
        nd = establish_normal_domain(
            planar_map,
            z,
            grid,
            radius=radius,
            require_neighbourhood=True,
            fill_threshold=fill_threshold,
            boundary_factor=boundary_factor,
            seed=seed,
        )
        chart = _chart_on(planar_map, nd, tol, k)
        if chart.injective:
            return chart
        logger.warning(
            f"psi fails grid-scale injectivity at {chart.injectivity_violations} cell pairs "
            f"(r={nd.radius:.5f})"
        )
        radius = nd.radius / 2.0
    raise VerificationFailed(
        f"Normal-form chart at {z} is not injective at grid scale",
        {"clause": "psi injective", "violations": chart.injectivity_violations, "radius": nd.radius},
    )


def _chart_on(planar_map: PlanarMap, nd: NormalDomain, tol: float, k: Optional[int]) -> NormalFormChart:
    z = nd.center
    grid = nd.grid
    h = grid.cell_size
    boundary = region_boundary(nd.region)
    rho = 0.5 * float(np.abs(boundary - z).min())
    degree = local_degree(planar_map, z, rho).degree
    if degree == 0:
        raise PreconditionFailed(
            f"Local degree at {z} is 0; f is not open there",
            {"clause": "nonzero local degree", "rho": rho},
        )
    orientation = 1 if degree > 0 else -1
    if k is None:
        k = abs(degree)
    elif k != abs(degree):
        logger.warning(f"Building a chart of order {k} where the local degree is {degree}")

    frame = _Frame(nd)
    rows, cols = nd.region.cells()
    u = np.zeros(frame.size, dtype=complex)
    u[frame.members] = (planar_map.evaluate_array(grid.centers_of(rows, cols)) - nd.image_center) / nd.radius
    crow, ccol = nd.center_cell
    center = int(frame.local(crow, ccol))
    u[center] = 0.0

    cluster_rows, cluster_cols = center_fiber_cluster(nd).cells()
    cluster = frame.local(cluster_rows, cluster_cols)
    in_region = frame.mask(frame.members)
    free = in_region & ~frame.mask(cluster)

    base = center + 1
    while not free[base]:
        if not in_region[base]:
            raise VerificationFailed(
                f"No region cell to the right of the fiber cluster of {z}",
                {"cluster_cells": int(cluster.size)},
            )
        base += 1

    offsets = np.zeros(frame.size, dtype=complex)
    offsets[frame.members] = grid.centers_of(rows, cols) - z

    psi, assigned = _continue_roots(u, free, base, k, frame.steps)
    _fill_cluster(u, psi, assigned, offsets, cluster, center, k, orientation, frame.steps)
    psi[center] = 0.0
    assigned[center] = True
    _fill_remaining(u, psi, assigned, frame.members, k, frame.steps)

    rings = _deck_rings(frame, u, psi, free, center, cluster, k, orientation)
    if not all(ring.consistent for ring in rings):
        raise MonodromyMismatch(
            f"Root continuation of order {k} around {z} does not match the deck generator",
            {"k": k, "degree": degree, "rings": [ring.to_dict() for ring in rings]},
        )

    done = frame.members[assigned[frame.members]]
    residual = float(np.abs(u[done] - psi[done] ** k).max())
    logger.info(f"Normal form at {z}: k={k}, residual {residual:.3e}, {len(rings)} rings checked")
    if residual > tol:
        raise ResidualExceeded(
            f"Normal-form residual {residual:.3e} exceeds {tol:.3e}",
            {"residual": residual, "tol": tol, "k": k},
        )

    points = grid.centers_of(rows, cols)
    values = psi[frame.members]
    points[frame.members == center] = z
    known = ~np.isnan(values)
    violations = _injectivity_violations(points[known], values[known], h, nd.radius)

    rim = np.unique((cluster[:, None] + frame.steps[None, :]).ravel())
    rim = rim[free[rim] & assigned[rim]]
    puncture = float(np.abs(psi[rim]).max()) if rim.size else 0.0

    return NormalFormChart(
        nd=nd,
        k=k,
        degree=degree,
        orientation=orientation,
        table=frame.embed(np.where(assigned, psi, np.nan), grid),
        residual=residual,
        tol=tol,
        rings=rings,
        injectivity_violations=violations,
        puncture_modulus=puncture,
    )


def _boundary_layer(nd: NormalDomain) -> np.ndarray:
    mask = nd.region.mask
    layer = mask & ~ndimage.binary_erosion(mask, structure=FOUR_CONNECTED)
    rows, cols = np.nonzero(layer)
    return nd.grid.centers_of(rows, cols)


def verify_normal_form(
    chart: NormalFormChart, probes: int = 1000, seed: int = 0, tol: Optional[float] = None
) -> NormalFormReport:
    """
    Probe the factorisation at points between cell centers

    90% of the probes are uniform over the region cells, the rest are split
    between a disk of 3 cells around the center and the boundary layer of U.
    """
    nd = chart.nd
    grid = nd.grid
    h = grid.cell_size
    rng = np.random.default_rng(seed)
    n_center = max(1, int(round(probes * CENTER_PROBE_FRACTION)))
    n_boundary = max(1, int(round(probes * BOUNDARY_PROBE_FRACTION)))
    n_uniform = max(0, probes - n_center - n_boundary)

    rows, cols = nd.region.cells()
    pick = rng.integers(0, len(rows), n_uniform)
    jitter = h * (rng.random(n_uniform) - 0.5) + 1j * h * (rng.random(n_uniform) - 0.5)
    uniform = grid.centers_of(rows[pick], cols[pick]) + jitter

    radii = CENTER_PROBE_CELLS * h * np.sqrt(rng.random(n_center))
    near_center = nd.center + radii * np.exp(2j * np.pi * rng.random(n_center))

    layer = _boundary_layer(nd)
    near_boundary = layer[rng.integers(0, len(layer), n_boundary)]

    points = np.concatenate([uniform, near_center, near_boundary])
    psi = chart.psi(points)
    known = ~np.isnan(psi)
    residuals = np.abs(chart.phi(nd.map.evaluate_array(points[known])) - psi[known] ** chart.k)

    sep_w = pdist(_xy(points[known]))
    sep_psi = pdist(_xy(psi[known]))
    far = sep_w > INJECTIVITY_SEPARATION_CELLS * h
    margin = float((sep_psi[far] / sep_w[far]).min()) if far.any() else float("inf")
    injective = not bool(np.any(far & (sep_psi < h / nd.radius)))

    boundary_psi = psi[len(uniform) + len(near_center):]
    boundary_psi = boundary_psi[~np.isnan(boundary_psi)]
    deviation = float(np.abs(1.0 - np.abs(boundary_psi)).max()) if boundary_psi.size else float("inf")

    report = NormalFormReport(
        probes=len(points),
        evaluated=int(known.sum()),
        max_residual=float(residuals.max()) if residuals.size else float("inf"),
        mean_residual=float(residuals.mean()) if residuals.size else float("inf"),
        tolerance=chart.tol if tol is None else tol,
        injectivity_margin=margin,
        injective=injective,
        boundary_deviation=deviation,
        boundary_tolerance=2.0 * h / nd.radius,
    )
    logger.info(
        f"Normal form check at {nd.center}: max residual {report.max_residual:.3e}, "
        f"margin {report.injectivity_margin:.3f}, boundary {report.boundary_deviation:.3e}"
    )
    return report
