"""Exception and warning types shared across the package."""

from __future__ import annotations

__all__ = [
    "QmetroError",
    "DomainError",
    "CapacityError",
    "NonUnitalError",
    "DegenerateSpectatorError",
    "NoClosedFormError",
    "PerpendicularityError",
    "IllConditionedError",
    "SeriesValidityWarning",
]


class QmetroError(Exception):
    """Base class for errors raised by qmetro."""


class DomainError(QmetroError, ValueError):
    """A parameter lies outside the domain of the operation."""


class CapacityError(QmetroError, ValueError):
    """Requested qubit count exceeds the dense-simulation cap."""


class NonUnitalError(QmetroError, ValueError):
    """The operation is only defined for unital channels."""


class DegenerateSpectatorError(QmetroError, ArithmeticError):
    """A spectator Gram matrix has a vanishing largest eigenvalue."""


class NoClosedFormError(QmetroError, ValueError):
    """Spectator channels are not diagonal in the protocol frame."""


class PerpendicularityError(QmetroError, ValueError):
    """The measurement schemes need the initial direction orthogonal to the control direction."""


class IllConditionedError(QmetroError, ArithmeticError):
    """A zero-probability outcome has a non-vanishing derivative."""


class SeriesValidityWarning(UserWarning):
    """Lowest-order purity expansion used outside its validity window (n r^2 > 0.1)."""
