"""Exception types shared across the package."""


class SubpercError(Exception):
    """Base class for all package errors."""


class ParameterError(SubpercError, ValueError):
    """A numeric parameter is outside its admissible range."""


class GeometryError(SubpercError, ValueError):
    """Regions overlap, leave the window, or are otherwise malformed."""


class InfeasibleError(SubpercError, ValueError):
    """SINR parameters admit no link at any distance."""


class BracketingError(SubpercError, RuntimeError):
    """A threshold scan's bracket does not straddle the target.

    ``lo_fraction`` and ``hi_fraction`` hold the measured endpoint values.
    """

    def __init__(self, message, lo_fraction=None, hi_fraction=None):
        super().__init__(message)
        self.lo_fraction = lo_fraction
        self.hi_fraction = hi_fraction


class PreconditionError(SubpercError, RuntimeError):
    """A Monte Carlo precondition (e.g. supercritical SNR graph) fails."""


class ConfigError(SubpercError, ValueError):
    """Experiment configuration could not be parsed or validated."""


class IntegrationError(SubpercError, ArithmeticError):
    """A quadrature did not converge (e.g. non-integrable attenuation)."""
