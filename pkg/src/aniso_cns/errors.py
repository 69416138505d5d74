"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for failures raised by the laboratory."""


class VacuumError(LabError, ValueError):
    """``1 + rho`` dropped below the admissible floor."""


class InstabilityError(LabError, FloatingPointError):
    """A time step produced non-finite values or blew up a field norm."""

    def __init__(self, msg, t=None, partial=None):
        super().__init__(msg)
        self.t = t
        self.partial = partial


class ConfigError(LabError, ValueError):
    """Malformed or out-of-range run configuration."""


class DegenerateRatioError(LabError, ZeroDivisionError):
    """An inequality right-hand side vanished."""


class FitWindowError(LabError, ValueError):
    """The requested fit window holds too few samples."""
