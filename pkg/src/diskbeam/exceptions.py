"""Exception types shared across the package."""


class DiskBeamError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DiskBeamError, ValueError):
    """Invalid parameters, catalog ids, grids or configuration files."""


class DomainError(DiskBeamError, ValueError):
    """Argument outside the domain on which a function is defined."""


class NumericalError(DiskBeamError, RuntimeError):
    """A solver failed; ``diagnostics`` carries whatever it could report."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StepFailure(NumericalError):
    """A time step could not be completed (Newton and all fallbacks failed)."""


class DataError(DiskBeamError, ValueError):
    """Input series unsuitable for a fit (non-positive, too short, ...)."""


class NotApplicable(DiskBeamError):
    """The requested quantity is undefined for this input (e.g. affine H)."""
