"""
Exception hierarchy shared by the library and the command line front end.
"""


class MomentLabError(Exception):
    """Base class for all errors raised by this project."""


class DomainError(MomentLabError, ValueError):
    """An input violates the preconditions of an operation."""


class InsufficientMomentsError(DomainError):
    """A moment order above the highest order carried by a profile was requested."""

    def __init__(self, order: int, available: int):
        self.order = order
        self.available = available
        super().__init__(
            f"moment of order {order} requested but the profile only carries "
            f"moments up to order {available}"
        )


class GuardExceededError(DomainError):
    """An enumeration would exceed its size guard."""

    def __init__(self, what: str, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(
            f"{what} would enumerate {size} terms (limit {limit}); refusing"
        )


class NumericError(MomentLabError, ArithmeticError):
    """A floating point computation cannot support the requested result."""
