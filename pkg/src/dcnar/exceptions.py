"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so modules should raise the
most specific class that applies rather than bare ValueError.
"""


class DcnarError(Exception):
    """Base class for all package errors."""


class PanelValidationError(DcnarError):
    """Input data violates the balanced-panel contract."""


class ConfigError(DcnarError):
    """Run configuration is missing, malformed, or inconsistent."""


class EstimationError(DcnarError):
    """A numerical estimation step failed (singular system, bad grid point)."""


class TrainingError(DcnarError):
    """Iterative training diverged or produced non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ExplosiveTrajectoryError(DcnarError):
    """A simulated trajectory exceeded the divergence guard."""


class ExtrapolationWarning(UserWarning):
    """Coefficient path evaluated outside its grid; endpoint value used."""
