"""Exception hierarchy used across the package."""


class MFGPError(Exception):
    """Base class for all errors raised by mfgp."""


class IllConditionedError(MFGPError):
    """A covariance matrix could not be factorized, even with jitter."""


class UnknownLevelError(MFGPError, KeyError):
    """A fidelity level has no noise variance attached to it."""

    def __str__(self):
        return Exception.__str__(self)


class UnfittableModelError(MFGPError):
    """Hyperparameter estimation could not produce a usable model."""


class DatasetError(MFGPError, ValueError):
    """Malformed or invalid dataset."""


class DesignError(MFGPError, ValueError):
    """Invalid experiment-design request."""


class ConfigError(MFGPError, ValueError):
    """Invalid run configuration."""


class NumericalConsistencyError(MFGPError, ArithmeticError):
    """A computed quantity violates a mathematical invariant beyond round-off."""
