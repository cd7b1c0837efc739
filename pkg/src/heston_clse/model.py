"""Parameter types for the subcritical Heston model and the reparametrisation
that makes the one-step conditional mean linear.

The Heston model is

    dY_t = (a - b Y_t) dt + sigma1 sqrt(Y_t) dW_t
    dX_t = (alpha - beta Y_t) dt + sigma2 sqrt(Y_t) (rho dW_t + sqrt(1 - rho^2) dB_t)

observed at integer times.  With unit spacing,

    E[Y_i | F_{i-1}]           = d Y_{i-1} + c
    E[X_i - X_{i-1} | F_{i-1}] = delta Y_{i-1} + gamma

where ``(c, d, gamma, delta) = forward_transform(a, b, alpha, beta)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "HestonParams",
    "DriftParams",
    "TransformedParams",
    "forward_transform",
    "inverse_transform",
    "delta_jacobian",
]

# below this |1 - d| the ratios in the inverse map are taken from their series
_SERIES_CUTOFF = 1e-4
_SERIES_TERMS = 10


@dataclass(frozen=True)
class DriftParams:
    """The estimable drift parameters ``(a, b, alpha, beta)``."""

    a: float
    b: float
    alpha: float
    beta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.alpha, self.beta], dtype=float)


@dataclass(frozen=True)
class HestonParams:
    """Subcritical Heston model parameters and the deterministic initial state.

    Attributes
    ----------
    a, b : float
        Drift level and mean-reversion speed of the variance ``Y``; both > 0.
    alpha, beta : float
        Drift level of ``X`` and its loading on ``Y``.
    sigma1, sigma2 : float
        Volatilities of ``Y`` and ``X``; both > 0.
    rho : float
        Correlation of the two driving Wiener processes, ``|rho| < 1``.
    y0, x0 : float
        Initial state; ``y0 > 0``.
    """

    a: float
    b: float
    alpha: float = 0.0
    beta: float = 0.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.0
    y0: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = float(getattr(self, f.name))
            if not math.isfinite(value):
                raise ParameterError(f"{f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, value)
        if self.a <= 0:
            raise ParameterError(f"a must be positive, got {self.a}")
        if self.b <= 0:
            raise ParameterError(f"b must be positive (subcritical regime), got {self.b}")
        if self.sigma1 <= 0:
            raise ParameterError(f"sigma1 must be positive, got {self.sigma1}")
        if self.sigma2 <= 0:
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")
        if not -1.0 < self.rho < 1.0:
            raise ParameterError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.y0 <= 0:
            raise ParameterError(f"y0 must be positive, got {self.y0}")

    @property
    def drift(self) -> DriftParams:
        return DriftParams(self.a, self.b, self.alpha, self.beta)

    def replace(self, **changes) -> HestonParams:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class TransformedParams:
    """Linear-regression parameters ``(c, d, gamma, delta)``.

    Estimates are stored here without any domain restriction; the inverse
    map checks ``c > 0`` and ``0 < d < 1`` itself.
    """

    c: float
    d: float
    gamma: float
    delta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c, self.d, self.gamma, self.delta], dtype=float)

    @classmethod
    def from_array(cls, values) -> TransformedParams:
        c, d, gamma, delta = (float(v) for v in values)
        return cls(c, d, gamma, delta)

    @property
    def in_image(self) -> bool:
        return self.c > 0 and 0.0 < self.d < 1.0


def forward_transform(p: HestonParams | DriftParams) -> TransformedParams:
    """Map ``(a, b, alpha, beta)`` to ``(c, d, gamma, delta)``.

    Examples
    --------
    >>> t = forward_transform(HestonParams(a=1.0, b=1.0))
    >>> round(t.c, 7), round(t.d, 7)
    (0.6321206, 0.3678794)
    """
    a, b, alpha, beta = p.a, p.b, p.alpha, p.beta
    one_minus_d = -math.expm1(-b)
    # b^{-2}(e^{-b} - 1 + b), written to avoid cancellation for small b
    second_integral = (b + math.expm1(-b)) / (b * b)
    return TransformedParams(
        c=a * one_minus_d / b,
        d=math.exp(-b),
        gamma=alpha - a * beta * second_integral,
        delta=-beta * one_minus_d / b,
    )


def _check_image(t: TransformedParams) -> None:
    if not (t.c > 0):
        raise DomainError(f"c must be positive, got {t.c}")
    if not (0.0 < t.d < 1.0):
        raise DomainError(f"d must lie in (0, 1), got {t.d}")


def _log_ratio(d: float) -> float:
    """log(d) / (1 - d)."""
    x = 1.0 - d
    if abs(x) < _SERIES_CUTOFF:
        return -sum(x ** (k - 1) / k for k in range(1, _SERIES_TERMS + 1))
    return math.log(d) / x


def _gamma_ratio(d: float) -> float:
    """(d - 1 - log d) / (1 - d)^2."""
    x = 1.0 - d
    if abs(x) < _SERIES_CUTOFF:
        return sum(x ** (k - 2) / k for k in range(2, _SERIES_TERMS + 2))
    return (d - 1.0 - math.log(d)) / (x * x)


def _jac_ratio_b(d: float) -> float:
    """(log d - 1 + 1/d) / (1 - d)^2."""
    x = 1.0 - d
    if abs(x) < _SERIES_CUTOFF:
        return sum((1.0 - 1.0 / k) * x ** (k - 2) for k in range(2, _SERIES_TERMS + 2))
    return (math.log(d) - 1.0 + 1.0 / d) / (x * x)


def _jac_ratio_c(d: float) -> float:
    """(2 log d - d + 1/d) / (1 - d)^3."""
    x = 1.0 - d
    if abs(x) < _SERIES_CUTOFF:
        return sum((1.0 - 2.0 / k) * x ** (k - 3) for k in range(3, _SERIES_TERMS + 3))
    return (2.0 * math.log(d) - d + 1.0 / d) / (x * x * x)


def inverse_transform(t: TransformedParams) -> DriftParams:
    """Map ``(c, d, gamma, delta)`` back to ``(a, b, alpha, beta)``.

    Raises
    ------
    DomainError
        If ``c <= 0`` or ``d`` is not in ``(0, 1)``.
    """
    _check_image(t)
    c, d, gamma, delta = t.c, t.d, t.gamma, t.delta
    lr = _log_ratio(d)
    return DriftParams(
        a=-c * lr,
        b=-math.log(d),
        alpha=gamma - c * delta * _gamma_ratio(d),
        beta=delta * lr,
    )


def delta_jacobian(t: TransformedParams) -> np.ndarray:
    """Jacobian of :func:`inverse_transform` at ``t``.

    Rows are ordered ``(a, b, alpha, beta)``, columns ``(c, d, gamma, delta)``.
    """
    _check_image(t)
    c, d, delta = t.c, t.d, t.delta
    lr = _log_ratio(d)
    rb = _jac_ratio_b(d)
    # (log d + 1 - d)/(1-d)^2 is minus the gamma ratio
    ra = -_gamma_ratio(d)
    return np.array(
        [
            [-lr, -c * rb, 0.0, 0.0],
            [0.0, -1.0 / d, 0.0, 0.0],
            [delta * ra, c * delta * _jac_ratio_c(d), 1.0, c * ra],
            [0.0, delta * rb, 0.0, lr],
        ]
    )
