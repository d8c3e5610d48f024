"""Exception types shared across the package."""


class RateError(Exception):
    """Base class for all package errors."""


class DataError(RateError, ValueError):
    """Invalid inputs: bad shapes, degenerate designs, violated preconditions."""


class NumericalError(RateError, ArithmeticError):
    """A factorization or closed-form evaluation failed numerically."""
