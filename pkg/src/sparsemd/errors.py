"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidConfigError(ValueError):
    """A protocol or scenario configuration is inconsistent."""


class MalformedMessageError(ValueError):
    """A wire message failed to decode (bad index, truncated stream, ...)."""


class NumericalFailureError(RuntimeError):
    """An iterative numerical routine failed to converge."""
