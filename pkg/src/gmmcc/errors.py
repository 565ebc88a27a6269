"""Exception hierarchy shared across the package."""


class GmmccError(Exception):
    """Base class for all gmmcc errors."""


class DomainError(GmmccError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class UsageError(GmmccError, TypeError):
    """Operation applied to an object of the wrong kind."""


class ValidationError(GmmccError, ValueError):
    """Problem data or model IR failed validation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class CertificationError(GmmccError):
    """A PWL approximation or audit broke its one-sided tau guarantee."""

    def __init__(self, message, z=None, x=None):
        super().__init__(message)
        self.z = z
        self.x = x


class UndefinedGradientError(GmmccError, ValueError):
    """Gradient requested at x = 0 with b <= 0."""
