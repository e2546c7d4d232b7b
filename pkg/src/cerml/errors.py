"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input data: shapes, labels, non-finite values, malformed files."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (singular system, eigensolver failure, non-finite objective)."""
