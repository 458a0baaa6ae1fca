"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    """A numeric parameter violates its admissible range."""


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


class ConfigurationError(ValueError):
    """Objects passed together are mutually inconsistent (rates, grids, intervals)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    ``interval`` holds the worst offending subinterval.
    """

    def __init__(self, message, interval=None, error_estimate=None):
        super().__init__(message)
        self.interval = interval
        self.error_estimate = error_estimate


class IntegrationError(RuntimeError):
    """An ODE solver failed to complete a step."""


class FactorizationError(RuntimeError):
    """A covariance matrix could not be Cholesky-factorized."""


class NotApplicableError(ValueError):
    """The operation does not apply to this kind of input."""


class InsufficientDataError(ValueError):
    """Too few points to fit or summarize."""
