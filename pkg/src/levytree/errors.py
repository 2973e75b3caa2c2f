"""Exception hierarchy shared by all modules."""


class LevyTreeError(Exception):
    """Base class for all package errors."""


class ValidationError(LevyTreeError, ValueError):
    """Input violates a documented invariant."""


class DomainError(ValidationError):
    """Argument outside the domain of a function (e.g. non-positive tail point)."""


class NumericalError(LevyTreeError, ArithmeticError):
    """A numerical procedure failed (starvation, disconnected graph, infinite estimate)."""


class NonUniqueTreeWarning(UserWarning):
    """The minimum spanning tree is not unique; a tie-broken tree was returned."""


class ClampWarning(UserWarning):
    """An estimate was clamped to the valid range."""
