"""Exception types shared across the package."""


class ShelabError(Exception):
    """Base class for package errors."""


class InvalidParameterError(ShelabError, ValueError):
    """Rejected input: a parameter violates a documented precondition."""


class GridMismatchError(ShelabError, ValueError):
    """Two grid-indexed objects do not share the same grid."""


class QuadratureError(ShelabError, RuntimeError):
    """A quadrature routine failed to reach its accuracy target."""


class DivergentRegimeError(ShelabError, ArithmeticError):
    """A closed-form expectation was requested outside its finiteness regime."""


class ConditioningError(ShelabError, RuntimeError):
    """A matrix factorization produced numerically unusable output."""
