"""Exception types shared across the package."""


class AirfedError(Exception):
    """Base class for all airfed errors."""


class DimensionMismatch(AirfedError, ValueError):
    """Operands do not have compatible shapes."""


class NotSymmetric(AirfedError, ValueError):
    """A matrix expected to be symmetric is not, beyond tolerance."""


class NotPositiveDefinite(AirfedError, ValueError):
    """Factorization hit a non-positive pivot."""


class NonConvergence(AirfedError, RuntimeError):
    """An iterative routine exhausted its budget without converging."""


class NegativeVariance(AirfedError, ValueError):
    """A variance parameter was negative."""


class RankDeficient(AirfedError, ValueError):
    """Generated design matrix is not full column rank."""


class InvalidKappa(AirfedError, ValueError):
    """Condition number outside the valid range (must be >= 1)."""


class NonPositiveStep(AirfedError, ValueError):
    """Step size must be strictly positive."""


class EmptySelection(AirfedError, ValueError):
    """An operation requiring at least one selected device got none."""


class ZeroChannel(AirfedError, ValueError):
    """A selected device cannot invert a zero channel coefficient."""


class ZeroAlpha(AirfedError, ValueError):
    """Recovery requires a strictly positive scaling factor."""


class PowerViolation(AirfedError, RuntimeError):
    """A transmitted signal exceeded the per-device power budget."""


class InvalidEps(AirfedError, ValueError):
    """Target accuracy outside (0, 1)."""


class InvalidVariant(AirfedError, ValueError):
    """Unknown bound variant name."""


class ConfigError(AirfedError, ValueError):
    """Experiment configuration is missing or inconsistent."""
