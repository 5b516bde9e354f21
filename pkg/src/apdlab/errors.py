"""Exception types shared across the package."""


class ApdLabError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(ApdLabError, ValueError):
    """A config document or parameter combination is invalid."""


class CapacityError(ApdLabError):
    """A computation would exceed the configured work bound."""


class TruncationError(ApdLabError, ValueError):
    """A requested truncation leaves more probability mass in the tail
    than the caller declared acceptable."""


class SingularFitError(ApdLabError, ValueError):
    """Fit input is degenerate (e.g. all abscissae identical)."""
