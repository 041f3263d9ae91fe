class EstimationError(Exception):
    """Base class for library errors."""


class PreconditionError(EstimationError, ValueError):
    """Inputs violate an operation's documented precondition."""


class NumericalError(EstimationError, ArithmeticError):
    """A linear solve or iteration failed numerically."""
