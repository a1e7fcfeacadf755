"""Exception hierarchy shared by the simulation and analysis modules."""


class MfrpError(Exception):
    """Base class for all package errors."""


class ConfigError(MfrpError, ValueError):
    """Invalid model, analysis or sweep configuration."""


class NonPositiveVariance(MfrpError, ValueError):
    pass


class DegenerateVariance(MfrpError):
    """A covariance diagonal entry collapsed to (numerically) zero."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class FactorizationFailure(MfrpError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class EmptyResult(MfrpError, ValueError):
    pass


class ZeroVariance(MfrpError, ValueError):
    pass


class DegenerateIncrements(MfrpError):
    pass


class InsufficientRange(MfrpError):
    pass


class ScaleTooLarge(MfrpError, ValueError):
    pass


class NoMaxima(MfrpError):
    pass


class InsufficientLines(MfrpError):
    pass


class PoorFitWarning(UserWarning):
    """Some partition-function regression inside |q| <= 2 has R^2 < 0.9."""
