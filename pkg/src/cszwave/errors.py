"""Exceptions shared across the solver stack."""


class DiffeomorphismFailure(RuntimeError):
    """The free surface is too large: the straightening map degenerates."""


class NoContraction(RuntimeError):
    """A fixed-point iteration stopped making progress (data too large)."""


class BlowUp(RuntimeError):
    """A time integration produced NaNs or exceeded the norm ceiling."""


class NormOverflow(OverflowError):
    """An exponentially weighted norm exceeds the representable range."""


class ConfigError(ValueError):
    """A run configuration failed to parse or validate."""
