"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`ArrayG2Error`
so callers (and the CLI) can separate numerical/validation failures from bugs.
"""

from __future__ import annotations


class ArrayG2Error(Exception):
    """Base class for all package errors."""


class ValidationError(ArrayG2Error, ValueError):
    """Input violates a documented invariant (bad geometry, bad config...)."""


class CoincidentPointsError(ValidationError):
    """Two emitters sit closer than the separation floor."""


class NearDefectiveError(ArrayG2Error):
    """Eigenvector matrix is too ill-conditioned (exceptional-point proximity).

    Callers should switch to the quadrature route for the kernel.
    """

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class QuadratureError(ArrayG2Error):
    """Adaptive real-axis quadrature did not reach the requested tolerance."""


class SingularKernelError(ArrayG2Error):
    """Pair propagator cannot be inverted reliably."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class LinearAmplitudeZeroError(ArrayG2Error):
    """Single-photon amplitude vanishes, the normalized g2 is undefined."""


class GridTooCoarseError(ValidationError):
    """Delay grid too coarse to locate a persistence crossing."""


class InfeasibleError(ArrayG2Error):
    """No evaluated point satisfies the optimization constraints."""
