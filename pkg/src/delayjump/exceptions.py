"""Exception hierarchy shared by the simulation, pricing and CLI layers."""


class DelayJumpError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DelayJumpError, ValueError):
    """A logarithm or power left the positive real axis."""


class PositivityError(DelayJumpError):
    """A jump factor ``1 + g*Y`` was not strictly positive."""


class RangeError(DelayJumpError, ValueError):
    """A time argument fell outside ``[-b, T]``."""


class DegenerateMarketError(DelayJumpError):
    """The jump risk driver ``g * lambda * L`` vanishes, so no measure change exists."""


class ThinningError(DelayJumpError):
    """The thinning majorant was too small for the encountered intensity."""


class HistoryError(DelayJumpError, ValueError):
    """An observed history does not cover ``[t - b, t]`` on the working grid."""


class QuadratureError(DelayJumpError):
    """A numerical integral failed to reach its tolerance."""


class FitError(DelayJumpError, ValueError):
    """A log-log rate fit received unusable error estimates."""


class ConfigError(DelayJumpError, ValueError):
    """A run configuration could not be parsed into a valid request."""


class ModelValidationError(DelayJumpError):
    """A model failed one of the positivity / regularity checks."""

    def __init__(self, report):
        self.report = report
        reasons = "; ".join(c.message for c in report.failures)
        super().__init__(f"model validation failed: {reasons}")


class AdmissibilityError(DelayJumpError):
    """The market price of risk does not stay below one."""

    def __init__(self, report):
        self.report = report
        reasons = "; ".join(c.message for c in report.failures)
        super().__init__(f"measure change not admissible: {reasons}")


class PreconditionError(DelayJumpError, ValueError):
    """A pricing request violates a documented precondition."""
