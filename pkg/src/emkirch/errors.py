"""Exception types shared across the package."""


class EmkirchError(Exception):
    """Base class for all package-specific errors."""


class SingularEvaluationError(EmkirchError, ValueError):
    """Raised when a Green function is evaluated at (or too close to) its source point."""


class SingularSystemError(EmkirchError, ValueError):
    """Raised when a recovery linear system is numerically singular."""


class DataMismatchError(EmkirchError, ValueError):
    """Raised when measurement data and array/band metadata are inconsistent."""


class ConfigError(EmkirchError, ValueError):
    """Raised on invalid scenario configuration; names the offending field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
