#!/usr/bin/env python3
"""
Planar map abstraction for branchcover
Evaluable continuous maps on planar domains, homeomorphisms for composition,
and the grid-sampled map format
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np

from errors import OutOfDomain, ParseError

logger = logging.getLogger(__name__)

ComplexFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1] in the complex plane"""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(
                f"Rectangle needs positive width and height, got {self.to_list()}"
            )

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=complex)
        return (
            (points.real >= self.x0)
            & (points.real <= self.x1)
            & (points.imag >= self.y0)
            & (points.imag <= self.y1)
        )

    def contains_rect(self, other: "Rect") -> bool:
        return (
            other.x0 >= self.x0
            and other.x1 <= self.x1
            and other.y0 >= self.y0
            and other.y1 <= self.y1
        )

    def intersect(self, other: "Rect") -> "Rect":
        return Rect(
            max(self.x0, other.x0),
            max(self.y0, other.y0),
            min(self.x1, other.x1),
            min(self.y1, other.y1),
        )

    def distance_to_edge(self, z: complex) -> float:
        """Distance from an interior point to the rectangle boundary"""
        return min(z.real - self.x0, self.x1 - z.real, z.imag - self.y0, self.y1 - z.imag)

    def to_list(self):
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def square(cls, center: complex, half_side: float) -> "Rect":
        return cls(
            center.real - half_side,
            center.imag - half_side,
            center.real + half_side,
            center.imag + half_side,
        )


@dataclass(frozen=True)
class DomainSpec:
    """
    Domain of a planar map: a closed rectangle or a closed disk

    Exactly one of `rect` or (`disk_center`, `disk_radius`) is set.
    """

    rect: Optional[Rect] = None
    disk_center: complex = 0j
    disk_radius: float = 0.0

    def __post_init__(self):
        if self.rect is None and not self.disk_radius > 0:
            raise ValueError("Disk domain needs a positive radius")

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "DomainSpec":
        return cls(rect=Rect(x0, y0, x1, y1))

    @classmethod
    def disk(cls, center: complex, radius: float) -> "DomainSpec":
        return cls(disk_center=complex(center), disk_radius=float(radius))

    @property
    def shape(self) -> str:
        return "rectangle" if self.rect is not None else "disk"

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=complex)
        if self.rect is not None:
            return self.rect.contains(points)
        return np.abs(points - self.disk_center) <= self.disk_radius

    def bounding_rect(self) -> Rect:
        if self.rect is not None:
            return self.rect
        return Rect.square(self.disk_center, self.disk_radius)

    def contains_rect(self, rect: Rect) -> bool:
        if self.rect is not None:
            return self.rect.contains_rect(rect)
        corners = np.array(
            [
                complex(rect.x0, rect.y0),
                complex(rect.x1, rect.y0),
                complex(rect.x0, rect.y1),
                complex(rect.x1, rect.y1),
            ]
        )
        return bool(np.all(self.contains(corners)))

    def to_dict(self):
        if self.rect is not None:
            return {"shape": "rectangle", "corners": self.rect.to_list()}
        return {
            "shape": "disk",
            "center": [self.disk_center.real, self.disk_center.imag],
            "radius": self.disk_radius,
        }


@dataclass(frozen=True)
class RegularityClaims:
    """Declared (not proven) topological properties of a map"""

    light: bool = True
    open: bool = True
    discrete: bool = True

    def to_dict(self):
        return {"light": self.light, "open": self.open, "discrete": self.discrete}


@dataclass(frozen=True, eq=False)
class PlanarMap:
    """
    A continuous map on a planar domain, evaluated on complex numpy arrays

    `func` must be vectorized: it receives an array of complex points and
    returns an array of the same shape.
    """

    domain: DomainSpec
    func: ComplexFunction = field(repr=False)
    claims: RegularityClaims = field(default_factory=RegularityClaims)
    lipschitz_hint: Optional[float] = None
    label: str = "map"

    def __post_init__(self):
        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise ValueError(f"lipschitz_hint must be positive, got {self.lipschitz_hint}")

    def evaluate(self, z: complex) -> complex:
        """
        Evaluate the map at a single point

        Args:
            z: Point of the domain

        Returns:
            f(z)

        Raises:
            OutOfDomain: if z lies outside the domain
        """
        z = complex(z)
        if not bool(self.domain.contains(z)):
            raise OutOfDomain(
                f"Point {z} is outside the domain of {self.label}",
                {"point": [z.real, z.imag], "domain": self.domain.to_dict()},
            )
        return complex(self.evaluate_array(np.array([z]))[0])

    def evaluate_array(self, points) -> np.ndarray:
        """Evaluate on an array of points (no domain check)"""
        points = np.asarray(points, dtype=complex)
        return np.asarray(self.func(points), dtype=complex)

    def __call__(self, points) -> np.ndarray:
        return self.evaluate_array(points)


def evaluate(planar_map: PlanarMap, z: complex) -> complex:
    """Evaluate `planar_map` at `z` with domain checking"""
    return planar_map.evaluate(z)


@dataclass(frozen=True, eq=False)
class Homeomorphism:
    """A planar homeomorphism with its inverse, used to compose test maps"""

    forward: ComplexFunction = field(repr=False)
    inverse: ComplexFunction = field(repr=False)
    lipschitz: float = 1.0
    label: str = "homeomorphism"

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.forward(np.asarray(points, dtype=complex)), dtype=complex)


def shear(c: float) -> Homeomorphism:
    """(x, y) -> (x + c*y, y)"""
    return Homeomorphism(
        forward=lambda z: z + c * z.imag,
        inverse=lambda w: w - c * w.imag,
        lipschitz=1.0 + abs(c),
        label=f"shear({c})",
    )


def _stretch_inverse(w: np.ndarray) -> np.ndarray:
    # |w| = s(1+s)/2 solved for s >= 0
    modulus = np.abs(w)
    s = 0.5 * (-1.0 + np.sqrt(1.0 + 8.0 * modulus))
    out = np.zeros_like(w)
    nonzero = modulus > 0
    out[nonzero] = w[nonzero] * (s[nonzero] / modulus[nonzero])
    return out


def radial_stretch() -> Homeomorphism:
    """z -> z(1+|z|)/2"""
    return Homeomorphism(
        forward=lambda z: z * (1.0 + np.abs(z)) / 2.0,
        inverse=_stretch_inverse,
        lipschitz=2.5,
        label="radial_stretch",
    )


def conjugation() -> Homeomorphism:
    """Orientation-reversing reflection z -> conj(z)"""
    return Homeomorphism(
        forward=np.conj, inverse=np.conj, lipschitz=1.0, label="conjugation"
    )


def compose(
    post: Optional[Homeomorphism],
    planar_map: PlanarMap,
    pre: Optional[Homeomorphism],
    label: Optional[str] = None,
    domain: Optional[DomainSpec] = None,
    lipschitz_hint: Optional[float] = None,
) -> PlanarMap:
    """
    Build post ∘ f ∘ pre

    Args:
        post: Homeomorphism applied after the map (or None)
        planar_map: Inner map f
        pre: Homeomorphism applied before the map (or None)
        label: Label of the composed map
        domain: Domain of the composition (defaults to the domain of f)
        lipschitz_hint: Bound for the composition; defaults to the product of the parts' bounds

    Returns:
        Composed PlanarMap; its evaluation is post(f(pre(z))) exactly
    """
    inner = planar_map.func

    def composed(z: np.ndarray) -> np.ndarray:
        if pre is not None:
            z = pre(z)
        w = np.asarray(inner(z), dtype=complex)
        if post is not None:
            w = post(w)
        return w

    hint = lipschitz_hint or planar_map.lipschitz_hint
    if hint is not None and lipschitz_hint is None:
        hint *= (pre.lipschitz if pre else 1.0) * (post.lipschitz if post else 1.0)

    parts = [p.label for p in (post,) if p] + [planar_map.label] + [
        p.label for p in (pre,) if p
    ]
    return PlanarMap(
        domain=domain or planar_map.domain,
        func=composed,
        claims=planar_map.claims,
        lipschitz_hint=hint,
        label=label or "∘".join(parts),
    )


class BilinearSurface:
    """Bilinear interpolation of complex node values on a regular lattice"""

    def __init__(self, values: np.ndarray, bounds: Rect):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 2:
            raise ValueError("Sampled map needs at least a 2x2 lattice")
        self.values = values
        self.bounds = bounds
        self.ny, self.nx = values.shape
        self.dx = bounds.width / (self.nx - 1)
        self.dy = bounds.height / (self.ny - 1)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=complex)
        u = np.clip((points.real - self.bounds.x0) / self.dx, 0.0, self.nx - 1.0)
        v = np.clip((points.imag - self.bounds.y0) / self.dy, 0.0, self.ny - 1.0)
        i0 = np.minimum(np.floor(u).astype(int), self.nx - 2)
        j0 = np.minimum(np.floor(v).astype(int), self.ny - 2)
        fu = u - i0
        fv = v - j0
        vals = self.values
        return (
            vals[j0, i0] * (1 - fu) * (1 - fv)
            + vals[j0, i0 + 1] * fu * (1 - fv)
            + vals[j0 + 1, i0] * (1 - fu) * fv
            + vals[j0 + 1, i0 + 1] * fu * fv
        )

    def lipschitz_estimate(self) -> float:
        jumps_x = np.abs(np.diff(self.values, axis=1)).max() / self.dx
        jumps_y = np.abs(np.diff(self.values, axis=0)).max() / self.dy
        return float(max(jumps_x, jumps_y, 1e-12))


def sampled_map(
    values: np.ndarray, bounds: Rect, label: str = "sampled"
) -> PlanarMap:
    """Wrap a lattice of samples (rows along y) as a continuous PlanarMap"""
    surface = BilinearSurface(values, bounds)
    return PlanarMap(
        domain=DomainSpec(rect=bounds),
        func=surface,
        lipschitz_hint=surface.lipschitz_estimate(),
        label=label,
    )


def sample_lattice(planar_map: PlanarMap, bounds: Rect, nx: int, ny: int) -> np.ndarray:
    """Evaluate a map on an nx-by-ny node lattice spanning `bounds` (rows along y)"""
    xs = np.linspace(bounds.x0, bounds.x1, nx)
    ys = np.linspace(bounds.y0, bounds.y1, ny)
    nodes = xs[None, :] + 1j * ys[:, None]
    return planar_map.evaluate_array(nodes)


def write_sampled_map(
    path: Union[str, Path], planar_map: PlanarMap, bounds: Rect, nx: int, ny: int
) -> Path:
    """
    Write a map in the sampled-map text format

    Header `grid <nx> <ny> <x0> <y0> <x1> <y1>`, then nx*ny lines of `re im`
    in row-major order (row index along y).
    """
    path = Path(path)
    values = sample_lattice(planar_map, bounds, nx, ny)
    lines = [f"grid {nx} {ny} {bounds.x0!r} {bounds.y0!r} {bounds.x1!r} {bounds.y1!r}"]
    lines.extend(f"{v.real!r} {v.imag!r}" for v in values.ravel())
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote sampled map {planar_map.label} ({nx}x{ny}) to {path}")
    return path


def _parse_header(line: str) -> Tuple[int, int, Rect]:
    parts = line.split()
    if len(parts) != 7 or parts[0] != "grid":
        raise ParseError(
            "Sampled map header must be 'grid <nx> <ny> <x0> <y0> <x1> <y1>'",
            line=1,
            field="header",
        )
    try:
        nx, ny = int(parts[1]), int(parts[2])
        x0, y0, x1, y1 = (float(p) for p in parts[3:])
    except ValueError as e:
        raise ParseError(f"Invalid sampled map header: {e}", line=1, field="header")
    if nx < 2 or ny < 2:
        raise ParseError("Sampled map needs nx, ny >= 2", line=1, field="header")
    try:
        return nx, ny, Rect(x0, y0, x1, y1)
    except ValueError as e:
        raise ParseError(str(e), line=1, field="header")


def load_sampled_map(path: Union[str, Path]) -> PlanarMap:
    """
    Load a grid-sampled map from the structured text format

    Args:
        path: File path

    Returns:
        PlanarMap interpolating the samples bilinearly

    Raises:
        ParseError: with line diagnostics on malformed content
    """
    path = Path(path)
    try:
        raw = path.read_text().splitlines()
    except OSError as e:
        raise ParseError(f"Cannot read sampled map {path}: {e}", field="map")

    lines = [(i + 1, line) for i, line in enumerate(raw) if line.strip()]
    if not lines:
        raise ParseError(f"Sampled map {path} is empty", line=1, field="header")

    nx, ny, bounds = _parse_header(lines[0][1])
    body = lines[1:]
    if len(body) != nx * ny:
        raise ParseError(
            f"Expected {nx * ny} sample lines, found {len(body)}",
            line=len(raw),
            field="samples",
        )

    values = np.empty(nx * ny, dtype=complex)
    for k, (lineno, line) in enumerate(body):
        parts = line.split()
        try:
            if len(parts) != 2:
                raise ValueError("expected 're im'")
            values[k] = complex(float(parts[0]), float(parts[1]))
        except ValueError as e:
            raise ParseError(f"Bad sample: {e}", line=lineno, field="samples")
    if not np.all(np.isfinite(values)):
        raise ParseError("Sampled map contains non-finite values", field="samples")

    logger.info(f"Loaded sampled map {path.name}: {nx}x{ny} over {bounds.to_list()}")
    return sampled_map(values.reshape(ny, nx), bounds, label=f"sampled:{path}")
