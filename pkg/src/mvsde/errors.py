"""Exception types shared across the package."""


class MvsdeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MvsdeError):
    """Invalid user-supplied configuration (unknown model, bad flag value, ...)."""


class ModelEvaluationError(MvsdeError):
    """A coefficient function returned a non-finite value."""

    def __init__(self, message, *, model=None, lag_index=None):
        super().__init__(message)
        self.model = model
        self.lag_index = lag_index


class IncommensurableGrid(MvsdeError):
    """A delay or the horizon is not an integer multiple of the step."""

    def __init__(self, message, *, offending_lags=()):
        super().__init__(message)
        self.offending_lags = tuple(offending_lags)


class DeltaOutOfRange(MvsdeError):
    """Step size outside the admissible open interval (0, 1)."""


class DimensionMismatch(MvsdeError):
    """Sample clouds live in different dimensions."""


class CountMismatch(MvsdeError):
    """Sample clouds have different cardinalities."""


class CapExceeded(MvsdeError):
    """Exact assignment requested above the configured size cap."""


class NonFiniteState(MvsdeError):
    """A particle state (or coefficient) became non-finite during stepping.

    Expected outcome for untamed contrast runs on superlinear models; the
    attributes identify where the blow-up was detected.
    """

    def __init__(self, message, *, particle=None, step=None, quantity=None):
        super().__init__(message)
        self.particle = particle
        self.step = step
        self.quantity = quantity


class SlopeUndefined(MvsdeError):
    """Slope fit requested with fewer than three points."""


class OracleMismatch(MvsdeError):
    """Particle mean and delay-ODE oracle disagree beyond the tolerance band."""

    def __init__(self, message, *, gap=None, tolerance=None):
        super().__init__(message)
        self.gap = gap
        self.tolerance = tolerance
