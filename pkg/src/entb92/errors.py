"""Exception types raised by the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a quantity is defined."""


class UndefinedQBERError(DomainError):
    """The QBER was requested at a point with no conclusive events."""


class NoViolationError(DomainError):
    """No efficiency in [0, 1] yields a Bell violation (no finite threshold)."""


class InsufficientDataError(ValueError):
    """A statistic was requested from counts that do not support it."""
