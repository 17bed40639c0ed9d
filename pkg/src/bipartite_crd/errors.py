"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """Invalid input: bad shapes, out-of-range parameters, malformed files."""


class ResourceError(RuntimeError):
    """A requested computation is too large to run (e.g. exhaustive enumeration)."""


class EstimationError(ArithmeticError):
    """An estimator is undefined for the given data (e.g. an empty arm)."""
