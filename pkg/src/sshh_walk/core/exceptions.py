"""Exceptions raised by the simulation core."""

from typing import Optional


class SSHHError(Exception):
    """Base class for domain errors of sshh-walk."""


class RecipeError(SSHHError, ValueError):
    """An experiment recipe violates the schema."""


class CapacityError(SSHHError):
    """A Hilbert space or dense matrix would exceed the configured cap."""

    def __init__(self, message: str, dimension: Optional[int] = None, cap: Optional[int] = None):
        super().__init__(message)
        self.dimension = dimension
        self.cap = cap


class GapClosureError(SSHHError):
    """A selected subset of eigenstates touches its complement."""

    def __init__(self, message: str, theta: float, gap: float):
        super().__init__(message)
        self.theta = theta
        self.gap = gap


class NumericError(SSHHError):
    """An eigensolver or propagator failed to converge."""


class NoFrontError(SSHHError):
    """The density never crossed the front-detection threshold."""


class BandIdentificationError(SSHHError):
    """The N-ion band could not be separated from the rest of the spectrum."""
