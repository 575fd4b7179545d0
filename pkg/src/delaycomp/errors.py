"""Exception types shared across the toolkit."""


class DelayCompError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(DelayCompError):
    """Invalid dimensions, parameter values, or config fields."""


class InfeasibleTimingError(DelayCompError):
    """A timing constraint cannot be met; the message names the violated inequality."""


class NumericalBlowupError(DelayCompError):
    """An evaluation produced a non-finite value."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t
