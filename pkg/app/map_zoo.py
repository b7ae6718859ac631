#!/usr/bin/env python3
"""
Built-in map zoo for branchcover
Test maps with analytic ground truth (branch points, critical values, inverse branches)
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from errors import ParseError
from planar_map import (
    DomainSpec,
    PlanarMap,
    Rect,
    RegularityClaims,
    compose,
    conjugation,
    load_sampled_map,
    radial_stretch,
    sample_lattice,
    sampled_map,
    shear,
)

logger = logging.getLogger(__name__)

ZOO_BOUNDS = Rect(-2.0, -2.0, 2.0, 2.0)
# largest |z| on the zoo square; Lipschitz hints bound |f'| there
ZOO_RADIUS = float(np.hypot(ZOO_BOUNDS.x1, ZOO_BOUNDS.y1))
SAMPLED_NODES = 401
SHEAR_FACTOR = 0.5

InverseBranches = Callable[[complex], List[complex]]


@dataclass(frozen=True)
class GroundTruth:
    """Analytic facts about a zoo map used as test oracles"""

    branch_points: List[Tuple[complex, int]] = field(default_factory=list)
    critical_values: List[complex] = field(default_factory=list)
    inverse_branches: Optional[InverseBranches] = field(default=None, repr=False)
    # Coefficients (highest degree first) for holomorphic polynomial entries
    polynomial: Optional[List[float]] = None

    def degree_at(self, z: complex, tol: float = 1e-9) -> int:
        """Signed local degree at z (1 away from declared branch points)"""
        for point, degree in self.branch_points:
            if abs(point - z) <= tol:
                return degree
        sign = -1 if any(d < 0 for _, d in self.branch_points) else 1
        return sign

    def to_dict(self) -> Dict:
        return {
            "branch_points": [
                {"location": [p.real, p.imag], "degree": d} for p, d in self.branch_points
            ],
            "critical_values": [[c.real, c.imag] for c in self.critical_values],
            "holomorphic": self.polynomial is not None,
        }


@dataclass(frozen=True)
class ZooEntry:
    identifier: str
    map: PlanarMap
    ground_truth: GroundTruth
    description: str = ""

    def to_dict(self) -> Dict:
        return {
            "id": self.identifier,
            "label": self.map.label,
            "description": self.description,
            "domain": self.map.domain.to_dict(),
            "claims": self.map.claims.to_dict(),
            "lipschitz_hint": self.map.lipschitz_hint,
            "ground_truth": self.ground_truth.to_dict(),
        }


def _zoo_domain() -> DomainSpec:
    return DomainSpec(rect=ZOO_BOUNDS)


def _power_map(k: int) -> PlanarMap:
    return PlanarMap(
        domain=_zoo_domain(),
        func=lambda z: z**k,
        lipschitz_hint=k * ZOO_RADIUS ** (k - 1),
        label=f"pow{k}",
    )


def _sheared_radius(c: float) -> float:
    """Largest |z + c Im z| over the zoo square"""
    return float(np.hypot(ZOO_BOUNDS.x1 + abs(c) * ZOO_BOUNDS.y1, ZOO_BOUNDS.y1))


def _stretched(s: float) -> float:
    return s * (1.0 + s) / 2.0


def _kth_roots(w: complex, k: int) -> List[complex]:
    if w == 0:
        return [0j]
    base = complex(w) ** (1.0 / k)
    return [base * np.exp(2j * np.pi * j / k) for j in range(k)]


def _winding(z: np.ndarray) -> np.ndarray:
    modulus = np.abs(z)
    out = np.zeros_like(z)
    np.divide(z * z, modulus, out=out, where=modulus > 0)
    return out


def _winding_inverse(w: complex) -> List[complex]:
    if w == 0:
        return [0j]
    root = np.sqrt(abs(w)) * np.sqrt(complex(w))
    return [complex(root), complex(-root)]


def _polynomial_inverse(coeffs: List[float]) -> InverseBranches:
    def inverse(w: complex) -> List[complex]:
        shifted = np.array(coeffs, dtype=complex)
        shifted[-1] -= w
        return [complex(r) for r in np.roots(shifted)]

    return inverse


def _power_entry(k: int) -> ZooEntry:
    branch = [(0j, k)] if k >= 2 else []
    coeffs = [1.0] + [0.0] * k
    return ZooEntry(
        identifier=f"pow{k}",
        map=_power_map(k),
        ground_truth=GroundTruth(
            branch_points=branch,
            critical_values=[0j] if k >= 2 else [],
            inverse_branches=lambda w, k=k: _kth_roots(w, k),
            polynomial=coeffs,
        ),
        description=f"z -> z^{k}",
    )


def _build_entries() -> Dict[str, ZooEntry]:
    entries: Dict[str, ZooEntry] = {}

    for k in range(1, 7):
        entry = _power_entry(k)
        entries[entry.identifier] = entry
    entries["identity"] = ZooEntry(
        identifier="identity",
        map=_power_map(1),
        ground_truth=entries["pow1"].ground_truth,
        description="alias of pow1",
    )

    quadratic_coeffs = [1.0, 0.0, -1.0]
    entries["quadratic"] = ZooEntry(
        identifier="quadratic",
        map=PlanarMap(
            domain=_zoo_domain(),
            func=lambda z: z * z - 1.0,
            lipschitz_hint=2.0 * ZOO_RADIUS,
            label="quadratic",
        ),
        ground_truth=GroundTruth(
            branch_points=[(0j, 2)],
            critical_values=[-1 + 0j],
            inverse_branches=_polynomial_inverse(quadratic_coeffs),
            polynomial=quadratic_coeffs,
        ),
        description="z -> z^2 - 1",
    )

    cubic_coeffs = [1.0, 0.0, -3.0, 0.0]
    entries["cubic"] = ZooEntry(
        identifier="cubic",
        map=PlanarMap(
            domain=_zoo_domain(),
            func=lambda z: z**3 - 3.0 * z,
            lipschitz_hint=3.0 * ZOO_RADIUS**2 + 3.0,
            label="cubic",
        ),
        ground_truth=GroundTruth(
            branch_points=[(-1 + 0j, 2), (1 + 0j, 2)],
            critical_values=[2 + 0j, -2 + 0j],
            inverse_branches=_polynomial_inverse(cubic_coeffs),
            polynomial=cubic_coeffs,
        ),
        description="z -> z^3 - 3z",
    )

    entries["winding2"] = ZooEntry(
        identifier="winding2",
        map=PlanarMap(
            domain=_zoo_domain(),
            func=_winding,
            lipschitz_hint=3.0,
            label="winding2",
        ),
        ground_truth=GroundTruth(
            branch_points=[(0j, 2)],
            critical_values=[0j],
            inverse_branches=_winding_inverse,
        ),
        description="z -> z^2/|z|, 0 -> 0 (non-holomorphic, degree 2 at 0)",
    )

    entries["modulus"] = ZooEntry(
        identifier="modulus",
        map=PlanarMap(
            domain=_zoo_domain(),
            func=lambda z: np.abs(z).astype(complex),
            claims=RegularityClaims(light=False, open=False, discrete=False),
            lipschitz_hint=1.0,
            label="modulus",
        ),
        ground_truth=GroundTruth(),
        description="z -> |z| (not open)",
    )

    entries["realpart"] = ZooEntry(
        identifier="realpart",
        map=PlanarMap(
            domain=_zoo_domain(),
            func=lambda z: z.real.astype(complex),
            claims=RegularityClaims(light=False, open=False, discrete=False),
            lipschitz_hint=1.0,
            label="realpart",
        ),
        ground_truth=GroundTruth(),
        description="z -> Re z (not light)",
    )

    pow2 = _power_map(2)
    sheared = shear(SHEAR_FACTOR)
    entries["pow2-shear"] = ZooEntry(
        identifier="pow2-shear",
        map=compose(
            None,
            pow2,
            sheared,
            label="pow2-shear",
            lipschitz_hint=2.0 * _sheared_radius(SHEAR_FACTOR) * sheared.lipschitz,
        ),
        ground_truth=GroundTruth(
            branch_points=[(0j, 2)],
            critical_values=[0j],
            inverse_branches=lambda w: [
                complex(sheared.inverse(np.array([r]))[0]) for r in _kth_roots(w, 2)
            ],
        ),
        description=f"z^2 after the shear (x, y) -> (x + {SHEAR_FACTOR}y, y)",
    )

    stretch = radial_stretch()
    entries["pow2-stretch"] = ZooEntry(
        identifier="pow2-stretch",
        map=compose(
            None,
            pow2,
            stretch,
            label="pow2-stretch",
            lipschitz_hint=2.0 * _stretched(ZOO_RADIUS) * (0.5 + ZOO_RADIUS),
        ),
        ground_truth=GroundTruth(
            branch_points=[(0j, 2)],
            critical_values=[0j],
            inverse_branches=lambda w: [
                complex(stretch.inverse(np.array([r]))[0]) for r in _kth_roots(w, 2)
            ],
        ),
        description="z^2 after the radial stretch z -> z(1+|z|)/2",
    )

    entries["conj-pow2"] = ZooEntry(
        identifier="conj-pow2",
        map=compose(conjugation(), pow2, None, label="conj-pow2"),
        ground_truth=GroundTruth(
            branch_points=[(0j, -2)],
            critical_values=[0j],
            inverse_branches=lambda w: _kth_roots(complex(w).conjugate(), 2),
        ),
        description="complex conjugate of z^2 (orientation reversing, degree -2)",
    )

    values = sample_lattice(pow2, ZOO_BOUNDS, SAMPLED_NODES, SAMPLED_NODES)
    entries["sampled-pow2"] = ZooEntry(
        identifier="sampled-pow2",
        map=sampled_map(values, ZOO_BOUNDS, label="sampled-pow2"),
        ground_truth=entries["pow2"].ground_truth,
        description=f"z^2 sampled on a {SAMPLED_NODES}x{SAMPLED_NODES} lattice",
    )

    return entries


@lru_cache(maxsize=1)
def _registry() -> Dict[str, ZooEntry]:
    entries = _build_entries()
    logger.debug(f"Map zoo initialised with {len(entries)} entries")
    return entries


def zoo() -> List[ZooEntry]:
    """Return every zoo entry in registration order"""
    return list(_registry().values())


def get_entry(identifier: str) -> ZooEntry:
    """
    Look up a zoo entry by identifier

    Raises:
        ParseError: if the identifier is unknown
    """
    entries = _registry()
    if identifier not in entries:
        raise ParseError(
            f"Unknown map '{identifier}'. Known maps: {', '.join(entries)}",
            field="map",
        )
    return entries[identifier]


def resolve_map(identifier: str) -> PlanarMap:
    """
    Resolve a CLI/scenario map identifier

    Args:
        identifier: Zoo id (e.g. 'pow3') or 'sampled:<path>'

    Returns:
        The PlanarMap
    """
    if identifier.startswith("sampled:"):
        return load_sampled_map(identifier[len("sampled:"):])
    return get_entry(identifier).map
