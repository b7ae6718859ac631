#!/usr/bin/env python3
"""
Grid discretization and connected-component machinery for branchcover
Cell sets, flood-fill components, region boundaries, polylines and preimage indexing
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from errors import EmptyInput, SeedNotInSet
from planar_map import DomainSpec, PlanarMap, Rect

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

# 4-adjacency
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)

# Neighbor order used everywhere a deterministic walk is needed: right, up, left, down
NEIGHBOR_OFFSETS: Tuple[Cell, ...] = ((0, 1), (1, 0), (0, -1), (-1, 0))

ROWS_PER_CHUNK = 128
NEAR_FIBER_FACTOR = 1.5


@dataclass(frozen=True)
class Grid:
    """
    Uniform lattice of square cells covering a rectangle

    Row index grows with the imaginary part, column index with the real part.
    Points on a shared edge belong to the cell with the smaller index.
    """

    bounds: Rect
    cell_size: float
    nx: int = field(init=False)
    ny: int = field(init=False)

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        object.__setattr__(self, "nx", max(1, math.ceil(self.bounds.width / self.cell_size - 1e-7)))
        object.__setattr__(self, "ny", max(1, math.ceil(self.bounds.height / self.cell_size - 1e-7)))

    @classmethod
    def around(
        cls,
        center: complex,
        half_side: float,
        cell_size: float,
        domain: Optional[DomainSpec] = None,
    ) -> "Grid":
        """
        Square window grid with `center` at the middle of its central cell

        Args:
            center: Point the window is built around
            half_side: Minimum half-side of the window
            cell_size: Cell edge length
            domain: If given, the window is clipped to the domain's bounding rectangle

        Returns:
            Grid
        """
        n = max(2, math.ceil(half_side / cell_size - 1e-9))
        bounds = Rect.square(complex(center), (n + 0.5) * cell_size)
        if domain is not None and not domain.contains_rect(bounds):
            outer = domain.bounding_rect()
            clipped = bounds.intersect(outer)
            logger.debug(f"Clipping grid window {bounds.to_list()} to {clipped.to_list()}")
            bounds = clipped
        return cls(bounds, cell_size)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def cell_of(self, z: complex) -> Cell:
        rows, cols = self.cells_of(np.array([complex(z)]))
        return int(rows[0]), int(cols[0])

    def cells_of(self, points) -> Tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=complex)
        cols = np.ceil((points.real - self.bounds.x0) / self.cell_size) - 1
        rows = np.ceil((points.imag - self.bounds.y0) / self.cell_size) - 1
        cols = np.clip(cols, 0, self.nx - 1).astype(int)
        rows = np.clip(rows, 0, self.ny - 1).astype(int)
        return rows, cols

    def center(self, cell: Cell) -> complex:
        row, col = cell
        return complex(
            self.bounds.x0 + (col + 0.5) * self.cell_size,
            self.bounds.y0 + (row + 0.5) * self.cell_size,
        )

    def centers_of(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return (self.bounds.x0 + (np.asarray(cols) + 0.5) * self.cell_size) + 1j * (
            self.bounds.y0 + (np.asarray(rows) + 0.5) * self.cell_size
        )

    def row_centers(self, row_start: int, row_stop: int) -> np.ndarray:
        """Cell centers of rows [row_start, row_stop) as a 2-D array"""
        xs = self.bounds.x0 + (np.arange(self.nx) + 0.5) * self.cell_size
        ys = self.bounds.y0 + (np.arange(row_start, row_stop) + 0.5) * self.cell_size
        return xs[None, :] + 1j * ys[:, None]

    def flat_index(self, cell: Cell) -> int:
        return cell[0] * self.nx + cell[1]

    def unflatten(self, flat) -> Tuple[np.ndarray, np.ndarray]:
        return np.divmod(np.asarray(flat), self.nx)

    def in_grid(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.ny and 0 <= cell[1] < self.nx

    def supersample_offsets(self) -> np.ndarray:
        """Center plus the midpoints between center and each corner"""
        q = self.cell_size / 4.0
        return np.array([0, q + 1j * q, -q + 1j * q, -q - 1j * q, q - 1j * q], dtype=complex)

    def to_dict(self) -> Dict:
        return {"bounds": self.bounds.to_list(), "cell_size": self.cell_size, "nx": self.nx, "ny": self.ny}


@dataclass(frozen=True, eq=False)
class CellSet:
    """A set of cells of a grid, stored as a boolean mask of shape (ny, nx)"""

    grid: Grid
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.mask.shape != self.grid.shape:
            raise ValueError(f"Mask shape {self.mask.shape} does not match grid {self.grid.shape}")

    @classmethod
    def from_cells(cls, grid: Grid, cells: Sequence[Cell]) -> "CellSet":
        mask = np.zeros(grid.shape, dtype=bool)
        for row, col in cells:
            mask[row, col] = True
        return cls(grid, mask)

    def __len__(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __contains__(self, cell: Cell) -> bool:
        return self.grid.in_grid(cell) and bool(self.mask[cell])

    def is_empty(self) -> bool:
        return not self.mask.any()

    def flat_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def cells(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.mask)

    def centers(self) -> np.ndarray:
        rows, cols = self.cells()
        return self.grid.centers_of(rows, cols)


@dataclass(frozen=True, eq=False)
class CellRegion(CellSet):
    """A 4-connected cell set"""

    @cached_property
    def diameter(self) -> float:
        return cells_diameter(self)

    @cached_property
    def touches_border(self) -> bool:
        m = self.mask
        return bool(m[0, :].any() or m[-1, :].any() or m[:, 0].any() or m[:, -1].any())

    def to_dict(self) -> Dict:
        return {"grid": self.grid.to_dict(), "members": self.flat_indices().tolist()}


@dataclass(frozen=True)
class DiskTarget:
    """Open disk B(center, radius) in the image plane"""

    center: complex
    radius: float

    def distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points - self.center)


@dataclass(frozen=True, eq=False)
class TubeTarget:
    """Open tubular neighbourhood of a polyline in the image plane"""

    vertices: np.ndarray
    radius: float

    def distance(self, points: np.ndarray) -> np.ndarray:
        return polyline_distance(points, self.vertices)


TargetSet = Union[DiskTarget, TubeTarget]


def polyline_distance(points, vertices) -> np.ndarray:
    """Distance from each point to the polyline through `vertices`"""
    points = np.asarray(points, dtype=complex)
    vertices = np.atleast_1d(np.asarray(vertices, dtype=complex))
    flat = points.ravel()
    if len(vertices) == 1:
        return np.abs(flat - vertices[0]).reshape(points.shape)

    best = np.full(flat.shape, np.inf)
    for a, b in zip(vertices[:-1], vertices[1:]):
        seg = b - a
        length2 = abs(seg) ** 2
        if length2 == 0:
            dist = np.abs(flat - a)
        else:
            t = np.clip(((flat - a) * np.conj(seg)).real / length2, 0.0, 1.0)
            dist = np.abs(flat - (a + t * seg))
        np.minimum(best, dist, out=best)
    return best.reshape(points.shape)


def rasterize_preimage(planar_map: PlanarMap, target: TargetSet, grid: Grid) -> CellSet:
    """
    Cells of `grid` with at least one of their 5 supersamples mapping into `target`

    Args:
        planar_map: Map to pull back through
        target: DiskTarget or TubeTarget
        grid: Grid whose bounds lie in the map's domain

    Returns:
        CellSet of the (over-approximated) preimage
    """
    offsets = grid.supersample_offsets()
    mask = np.zeros(grid.shape, dtype=bool)
    for start in range(0, grid.ny, ROWS_PER_CHUNK):
        stop = min(start + ROWS_PER_CHUNK, grid.ny)
        centers = grid.row_centers(start, stop)
        hit = np.zeros(centers.shape, dtype=bool)
        for offset in offsets:
            values = planar_map.evaluate_array(centers + offset)
            hit |= target.distance(values) < target.radius
        mask[start:stop] = hit
    logger.debug(f"Rasterized preimage of {type(target).__name__}: {np.count_nonzero(mask)} cells")
    return CellSet(grid, mask)


def _bbox(mask: np.ndarray) -> Tuple[slice, slice]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1)


def label_cells(mask: np.ndarray) -> Tuple[np.ndarray, int]:
    """4-connected component labels of a boolean mask (0 = background)"""
    labels, count = ndimage.label(mask, structure=FOUR_CONNECTED)
    return labels, int(count)


def connected_component(cells: CellSet, seed: Cell) -> CellRegion:
    """
    Maximal 4-connected subset of `cells` containing `seed`

    Raises:
        SeedNotInSet: if seed is not a member
    """
    if seed not in cells:
        raise SeedNotInSet(
            f"Seed cell {seed} is not in the cell set",
            {"seed": list(seed), "size": len(cells)},
        )
    rows, cols = _bbox(cells.mask)
    labels, _ = label_cells(cells.mask[rows, cols])
    seed_label = labels[seed[0] - rows.start, seed[1] - cols.start]
    mask = np.zeros(cells.grid.shape, dtype=bool)
    mask[rows, cols] = labels == seed_label
    return CellRegion(cells.grid, mask)


def components(cells: CellSet) -> List[CellRegion]:
    """All 4-connected components of a cell set, in raster order of their first cell"""
    if cells.is_empty():
        return []
    labels, count = label_cells(cells.mask)
    return [CellRegion(cells.grid, labels == k) for k in range(1, count + 1)]


def region_boundary(region: CellSet) -> np.ndarray:
    """
    Edge midpoints between member cells and in-grid non-member cells

    Args:
        region: Nonempty cell set

    Returns:
        Complex array of boundary sample points (empty if the set fills the grid)
    """
    if region.is_empty():
        raise EmptyInput("Region has no cells")
    grid = region.grid
    padded = np.pad(region.mask, 1, constant_values=True)
    inner = padded[1:-1, 1:-1]
    half = grid.cell_size / 2.0
    points = []
    for (dr, dc) in NEIGHBOR_OFFSETS:
        neighbor = padded[1 + dr: 1 + dr + grid.ny, 1 + dc: 1 + dc + grid.nx]
        rows, cols = np.nonzero(inner & ~neighbor)
        points.append(grid.centers_of(rows, cols) + half * complex(dc, dr))
    return np.concatenate(points)


def _as_xy(points) -> np.ndarray:
    points = np.asarray(points, dtype=complex).ravel()
    return np.column_stack([points.real, points.imag])


def hausdorff_distance(a, b) -> float:
    """
    Symmetric Hausdorff distance between two finite point sets

    Raises:
        EmptyInput: if either set is empty
    """
    xa, xb = _as_xy(a), _as_xy(b)
    if len(xa) == 0 or len(xb) == 0:
        raise EmptyInput("Hausdorff distance needs two nonempty point sets")
    forward, _ = cKDTree(xb).query(xa)
    backward, _ = cKDTree(xa).query(xb)
    return float(max(forward.max(), backward.max()))


def points_diameter(points) -> float:
    xy = _as_xy(points)
    if len(xy) < 2:
        return 0.0
    if len(xy) > 3:
        try:
            xy = xy[ConvexHull(xy).vertices]
        except QhullError:
            # collinear sets: extremes along the dominant axis
            spread = xy.max(axis=0) - xy.min(axis=0)
            axis = int(np.argmax(spread))
            xy = xy[[np.argmin(xy[:, axis]), np.argmax(xy[:, axis])]]
    return float(pdist(xy).max())


def cells_diameter(cells: CellSet) -> float:
    """Max distance between member cell centers plus sqrt(2)*cell_size"""
    if cells.is_empty():
        raise EmptyInput("Cannot take the diameter of an empty cell set")
    return points_diameter(cells.centers()) + math.sqrt(2.0) * cells.grid.cell_size


def dilate(mask: np.ndarray, iterations: int) -> np.ndarray:
    """Grow a mask by `iterations` cells in the 8-neighbourhood (Chebyshev distance)"""
    if iterations <= 0:
        return mask.copy()
    square = ndimage.generate_binary_structure(2, 2)
    return ndimage.binary_dilation(mask, structure=square, iterations=iterations)


@dataclass(frozen=True, eq=False)
class Polyline:
    """Piecewise-linear path t -> point over t in [0, 1]"""

    vertices: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=complex)
        params = np.asarray(self.params, dtype=float)
        if vertices.ndim != 1 or len(vertices) < 2 or len(vertices) != len(params):
            raise ValueError("Polyline needs matching vertices and params of length >= 2")
        if params[0] != 0.0 or params[-1] != 1.0 or np.any(np.diff(params) < 0):
            raise ValueError("Polyline params must be nondecreasing from 0 to 1")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "params", params)

    @classmethod
    def through(cls, points: Sequence[complex]) -> "Polyline":
        """Polyline with vertices equally spaced in parameter"""
        points = np.asarray(points, dtype=complex)
        return cls(points, np.linspace(0.0, 1.0, len(points)))

    @classmethod
    def segment(cls, a: complex, b: complex) -> "Polyline":
        return cls(np.array([a, b], dtype=complex), np.array([0.0, 1.0]))

    def at(self, t):
        t = np.asarray(t, dtype=float)
        values = np.interp(t, self.params, self.vertices.real) + 1j * np.interp(
            t, self.params, self.vertices.imag
        )
        return complex(values) if values.ndim == 0 else values

    def trace(self, t0: float, t1: float) -> np.ndarray:
        """Vertices of the sub-path over [t0, t1]"""
        inside = (self.params > t0) & (self.params < t1)
        return np.concatenate([[self.at(t0)], self.vertices[inside], [self.at(t1)]])

    def resample(self, params: np.ndarray) -> "Polyline":
        params = np.asarray(params, dtype=float)
        return Polyline(self.at(params), params)

    def length(self) -> float:
        return float(np.abs(np.diff(self.vertices)).sum())

    def arc_length_params(self) -> np.ndarray:
        """Normalised cumulative arc length at each vertex"""
        steps = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.vertices)))])
        if steps[-1] == 0:
            return self.params.copy()
        return steps / steps[-1]

    @property
    def start(self) -> complex:
        return complex(self.vertices[0])

    @property
    def end(self) -> complex:
        return complex(self.vertices[-1])

    def to_dict(self) -> Dict:
        return {
            "vertices": [[v.real, v.imag] for v in self.vertices],
            "params": self.params.tolist(),
        }


class PreimageIndex:
    """
    k-d tree over the images of the 5 supersamples of every cell of a region

    Answers "which cells have a sample mapping near this image-side set"
    without evaluating the map again.
    """

    def __init__(self, planar_map: PlanarMap, region: CellSet):
        grid = region.grid
        rows, cols = region.cells()
        self.grid = grid
        self.region = region
        self.flat = rows * grid.nx + cols
        centers = grid.centers_of(rows, cols)
        offsets = grid.supersample_offsets()
        self.samples = (centers[:, None] + offsets[None, :]).ravel()
        self.images = planar_map.evaluate_array(self.samples)
        self.center_images = self.images[:: len(offsets)]
        self.sample_cell = np.repeat(self.flat, len(offsets))
        steps = grid.cell_size * np.array([1, 1j, -1, -1j])
        neighbours = planar_map.evaluate_array(centers[:, None] + steps[None, :])
        self.local_jump = np.abs(neighbours - self.center_images[:, None]).max(axis=1)
        self.tree = cKDTree(_as_xy(self.images))
        logger.debug(f"Preimage index built over {len(self.flat)} cells")

    def _mask_from_samples(self, sample_ids) -> CellSet:
        mask = np.zeros(self.grid.shape, dtype=bool)
        if len(sample_ids):
            mask.flat[np.unique(self.sample_cell[np.asarray(sample_ids, dtype=int)])] = True
        return CellSet(self.grid, mask)

    def cells_near_point(self, y: complex, radius: float) -> CellSet:
        ids = self.tree.query_ball_point([y.real, y.imag], radius)
        return self._mask_from_samples(ids)

    def cells_near_polyline(self, vertices, radius: float) -> CellSet:
        """Cells with a sample image strictly within `radius` of the polyline"""
        mask = np.zeros(self.grid.shape, dtype=bool)
        mask.flat[self.cell_ids_near_polyline(vertices, radius)] = True
        return CellSet(self.grid, mask)

    def center_images_of(self, flat_ids) -> np.ndarray:
        """Center images of region cells given by flat index"""
        return self.center_images[np.searchsorted(self.flat, flat_ids)]

    def cell_ids_near_polyline(self, vertices, radius: float) -> np.ndarray:
        """Sorted flat indices of the cells matched by cells_near_polyline"""
        vertices = np.atleast_1d(np.asarray(vertices, dtype=complex))
        spacing = radius / 2.0
        dense = [vertices[:1]]
        for a, b in zip(vertices[:-1], vertices[1:]):
            steps = max(1, int(math.ceil(abs(b - a) / spacing)))
            dense.append(a + (b - a) * np.arange(1, steps + 1) / steps)
        dense = np.concatenate(dense)
        hits = self.tree.query_ball_point(_as_xy(dense), radius + spacing / 2.0)
        candidates = np.unique(np.concatenate([np.asarray(h, dtype=int) for h in hits]))
        if len(candidates):
            close = polyline_distance(self.images[candidates], vertices) < radius
            candidates = candidates[close]
        return np.unique(self.sample_cell[candidates])

    def near_fiber(self, y: complex, tol: Optional[float] = None) -> CellSet:
        """
        Region cells whose center maps near y

        Without `tol` a cell qualifies when |f(center) - y| is below
        NEAR_FIBER_FACTOR times the largest jump from its center image to the
        images of its four neighbour centers, so the tolerance follows the
        local stretch of the map.
        """
        if tol is None:
            close = np.abs(self.center_images - y) < NEAR_FIBER_FACTOR * self.local_jump
        else:
            close = np.abs(self.center_images - y) < tol
        mask = np.zeros(self.grid.shape, dtype=bool)
        mask.flat[self.flat[close]] = True
        return CellSet(self.grid, mask)
