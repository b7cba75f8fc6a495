"""Exception types raised across the package."""


class StateValidationError(ValueError):
    """A matrix failed the Hermitian / unit-trace / positivity checks."""


class NumericalError(RuntimeError):
    """A numerical routine produced an unusable result."""


class ConfigError(ValueError):
    """An experiment configuration failed to parse or validate."""
