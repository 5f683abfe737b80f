"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration (CLI exit code 1)."""


class NumericalError(RuntimeError):
    """Positivity, convergence or spectral failure (CLI exit code 2)."""


class InvalidStateError(ValueError):
    """Matrix that is not a valid density matrix."""


class NoRelaxationError(ValueError):
    """Population ratio undefined because no population transfer occurs."""


class MarkovianityWarning(UserWarning):
    """gamma*tau is not small; interaction windows overlap appreciably."""


class ResolutionWarning(UserWarning):
    """Time grid too coarse for trapezoidal work integration."""
