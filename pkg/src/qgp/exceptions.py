"""Exception hierarchy shared by every qgp module."""


class QGPError(Exception):
    """Base class for all errors raised by qgp."""


class LayoutError(QGPError, ValueError):
    """Subsystem labels or dimensions are inconsistent."""


class DimensionCapError(LayoutError):
    """A layout would exceed the configured total-dimension cap."""


class StateValidationError(QGPError, ValueError):
    """A matrix or vector fails the invariants of the type it was given as."""


class ConstraintError(QGPError, ValueError):
    """An input violates a problem constraint (e.g. the side-state marginal)."""


class ContractViolation(QGPError):
    """A numerical contract that should always hold was observed to fail."""
