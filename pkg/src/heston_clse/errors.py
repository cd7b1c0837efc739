"""Exception types raised across the package."""


class HestonClseError(Exception):
    """Base class for all package errors."""


class ParameterError(HestonClseError, ValueError):
    """Model parameters violate the subcritical Heston domain."""


class DomainError(HestonClseError, ValueError):
    """Transformed parameters lie outside the image of the forward map,
    i.e. ``c <= 0`` or ``d`` not in ``(0, 1)``."""


class ConfigError(HestonClseError, ValueError):
    """Invalid simulation, experiment or CLI configuration."""


class SingularGramError(HestonClseError, ArithmeticError):
    """The regressor Gram matrix is (numerically) singular."""


class MissingOriginal(HestonClseError):
    """An estimate has no original-parameter layer (it fell outside the image)."""


class NearSingularCovariance(HestonClseError, ArithmeticError):
    """Covariance matrix too close to singular to be whitened."""
