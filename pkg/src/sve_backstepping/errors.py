"""Exception hierarchy shared by all modules."""


class SVEError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SVEError, ValueError):
    """An input lies outside the domain where a formula is defined."""


class DegeneracyError(SVEError):
    """Repeated or complex eigenvalues, or a singular characteristic transform."""


class CriticalFlowError(SVEError):
    """An eigenvalue vanishes (critical flow, Fr close to 1 or a = 0)."""


class RegimeError(SVEError):
    """The eigenvalue sign pattern matches neither flow regime."""


class ScalingError(SVEError):
    """A characteristic scaling factor r_k is zero (no friction)."""


class ConvergenceError(SVEError):
    """Picard iteration did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CFLError(SVEError):
    """Time step exceeds the explicit upwind stability bound."""


class ConfigError(SVEError):
    """Malformed or incomplete scenario file."""
