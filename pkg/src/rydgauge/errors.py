"""Exception types raised by the simulator."""

from __future__ import annotations


class RydgaugeError(Exception):
    """Base class for all errors raised by this package."""


class SingularityError(RydgaugeError, ValueError):
    """The interatomic separation vanishes (R = 0) or an on-axis quantity is requested at rho = 0."""


class EigensolverError(RydgaugeError):
    def __init__(self, position, cause: Exception | None = None) -> None:
        self.position = position
        super().__init__(f"eigensolver failed at {position!r}: {cause}")


class DegeneracyError(RydgaugeError):
    """Two adiabatic states are too close in energy for the requested quantity."""

    def __init__(self, message: str, gap: float | None = None, where=None) -> None:
        self.gap = gap
        self.where = where
        super().__init__(message)


class AmbiguityError(RydgaugeError):
    """Overlap-based state tracking cannot decide between two candidates."""

    def __init__(self, message: str, where=None) -> None:
        self.where = where
        super().__init__(message)


class DetectionError(RydgaugeError):
    """No adiabatic curve matches the well-state criteria."""


class ResolutionError(RydgaugeError, ValueError):
    """A radial grid is too coarse for the requested bound-state problem."""


class ConsistencyError(RydgaugeError):
    """Two independent evaluation routes disagree beyond tolerance."""


class DomainExit(RydgaugeError):
    """A trajectory left the region where the model is trusted."""

    def __init__(self, time: float, rho: float) -> None:
        self.time = time
        self.rho = rho
        super().__init__(f"trajectory left the validity window at tau={time:.6g} (rho={rho:.6g})")
