"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedRangeError(ValueError):
    """The argument is mathematically fine but outside the validated range."""


class AccuracyError(RuntimeError):
    """A quadrature or iteration could not certify the requested accuracy.

    The achieved error estimate is carried in :attr:`estimate`.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")
        self.estimate = estimate


class ConfigurationError(ValueError):
    """Inconsistent run configuration (grids, truncation, missing inputs)."""


class IncompatibleDataError(ValueError):
    """Input data violates the compatibility conditions of the problem."""


class DegenerateHorizonError(ArithmeticError):
    """A recovery denominator underflowed; the horizon is numerically degenerate."""


class OracleInstabilityError(RuntimeError):
    """The finite-difference reference solver detected norm growth."""
