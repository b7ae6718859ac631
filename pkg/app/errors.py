#!/usr/bin/env python3
"""
Error types for branchcover
Every error carries a stable machine-readable code used in scenario reports
"""

from typing import Any, Dict, Optional


class BranchCoverError(Exception):
    """Base class for all domain errors raised by branchcover operations"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> Dict[str, Any]:
        """
        Serialize the error for a task report

        Returns:
            Dictionary with code, message and details
        """
        return {"code": self.code, "message": self.message, "details": self.details}


# map-core
class OutOfDomain(BranchCoverError):
    """A point lies outside the domain of a planar map"""


# region
class SeedNotInSet(BranchCoverError):
    """Flood fill seed is not a member of the cell set"""


class EmptyInput(BranchCoverError):
    """An operation received an empty point set"""


# normal
class NoRadiusFound(BranchCoverError):
    """Every candidate neighbourhood boundary meets the fiber (lightness failure)"""


class VerificationFailed(BranchCoverError):
    """Normal-domain evidence is outside tolerance (radius too large or grid too coarse)"""


# lifting
class ModulusNotFound(BranchCoverError):
    """The lift modulus underflowed the grid resolution"""


class ChainBroken(BranchCoverError):
    """No component of the next interval meets the current chain component"""


class ToleranceNotMet(BranchCoverError):
    """Refinement exhausted the grid before the requested tolerance was met"""


class PreconditionFailed(BranchCoverError):
    """An operation precondition does not hold; the message names the clause"""


class InfiniteLiftSuspect(BranchCoverError):
    """Ray-lift enumeration kept producing new lifts beyond the configured cap"""


# branch
class DegenerateLoop(BranchCoverError):
    """A probe loop sample maps onto the value it is supposed to wind around"""


class Unresolved(BranchCoverError):
    """Winding estimate did not stabilise within the sample budget"""


class NonIsolatedBranch(BranchCoverError):
    """Two branch candidates cannot be separated at grid resolution"""


# factor
class MonodromyMismatch(BranchCoverError):
    """Root continuation around the center does not match the deck generator"""


class ResidualExceeded(BranchCoverError):
    """Normal-form residual is above the requested tolerance"""


# cli
class ParseError(BranchCoverError):
    """Scenario file could not be parsed or validated"""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        field: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        merged = dict(details or {})
        if line is not None:
            merged["line"] = line
        if field is not None:
            merged["field"] = field
        super().__init__(message, merged)
        self.line = line
        self.field = field
