"""Limit theory of the CLS estimator.

``sqrt(n) (theta_hat - theta)`` is asymptotically ``N_4(0, E)`` in the
``(c, d, gamma, delta)`` parametrisation, with

    E = [[C1, C5], [C5, C3]] kron M1 + [[C2, C6], [C6, C4]] kron M2

where the ``C_k`` are the coefficients of the affine conditional second moments
of the innovations and ``M1``, ``M2`` are built from the first three moments
of the stationary Gamma law of ``Y``.  The drift parameters inherit
``J E J^T`` through the Jacobian of the inverse reparametrisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .errors import MissingOriginal
from .estimate import ClseResult
from .model import HestonParams, delta_jacobian, forward_transform

__all__ = [
    "StationaryMoments",
    "NoiseMoments",
    "AsymptoticCovariance",
    "ConfidenceIntervals",
    "PARAM_NAMES",
    "stationary_moments",
    "noise_moments",
    "covariance_e",
    "covariance_original",
    "confidence_intervals",
]

PARAM_NAMES = ("a", "b", "alpha", "beta")
TRANSFORMED_NAMES = ("c", "d", "gamma", "delta")


class _ExpPoly:
    """``b^{-q} * sum_k coef_k * b^{j_k} * exp(-m_k b)``, an entire function of b.

    For small ``b`` the closed form cancels badly, so it is evaluated from
    its Taylor series, whose coefficients are computed exactly once.
    """

    SERIES_BELOW = 1.0
    SERIES_TERMS = 32

    def __init__(self, q, *terms):
        self.q = q
        self.terms = [(float(c), j, m) for c, j, m in terms]
        coefs = []
        for k in range(q + self.SERIES_TERMS):
            total = Fraction(0)
            for c, j, m in terms:
                if k >= j:
                    total += Fraction(c) * Fraction((-m) ** (k - j), math.factorial(k - j))
            coefs.append(total)
        if any(coefs[:q]):
            raise ValueError("numerator does not vanish to the stated order")
        self.series = [float(c) for c in coefs[q:]]

    def __call__(self, b: float) -> float:
        if b < self.SERIES_BELOW:
            acc = 0.0
            for c in reversed(self.series):
                acc = acc * b + c
            return acc
        num = sum(c * b**j * math.exp(-m * b) for c, j, m in self.terms)
        return num / b**self.q


# Iterated exponential integrals over the unit interval, in closed form.
_K1 = _ExpPoly(1, (1, 0, 1), (-1, 0, 2))  # int_0^1 e^{-b(2-v)} dv
_K2 = _ExpPoly(2, (Fraction(1, 2), 0, 0), (-1, 0, 1), (Fraction(1, 2), 0, 2))
_T3A = _ExpPoly(3, (1, 0, 0), (-1, 0, 2), (-2, 1, 1))
_T3B = _ExpPoly(2, (1, 0, 0), (-1, 0, 1), (-1, 1, 1))
_T3C = _ExpPoly(1, (1, 0, 0), (-1, 0, 1))
_T4A = _ExpPoly(
    4, (1, 1, 0), (Fraction(-5, 2), 0, 0), (2, 0, 1), (2, 1, 1), (Fraction(1, 2), 0, 2)
)
_T4B = _ExpPoly(2, (1, 1, 0), (-1, 0, 0), (1, 0, 1))
_T4C = _ExpPoly(3, (1, 1, 0), (-2, 0, 0), (1, 1, 1), (2, 0, 1))
_T5A = _ExpPoly(2, (1, 1, 1), (-1, 0, 1), (1, 0, 2))
_T6A = _ExpPoly(3, (Fraction(1, 2), 0, 0), (Fraction(-1, 2), 0, 2), (-1, 1, 1))
_T6B = _T3B


@dataclass(frozen=True)
class StationaryMoments:
    """First three moments of the stationary law of ``Y``."""

    m1: float
    m2: float
    m3: float

    @property
    def variance(self) -> float:
        return self.m2 - self.m1**2

    def first_gram(self) -> np.ndarray:
        """``[[1, m1], [m1, m2]]``, the limit of the scaled Gram matrix."""
        return np.array([[1.0, self.m1], [self.m1, self.m2]])

    def second_gram(self) -> np.ndarray:
        return np.array([[self.m1, self.m2], [self.m2, self.m3]])


@dataclass(frozen=True)
class NoiseMoments:
    """Coefficients of the conditional second moments of the innovations:

    ``E[eps^2|F] = C1 Y + C2``, ``E[eta^2|F] = C3 Y + C4``,
    ``E[eps eta|F] = C5 Y + C6``.
    """

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float

    def slope_matrix(self) -> np.ndarray:
        return np.array([[self.c1, self.c5], [self.c5, self.c3]])

    def intercept_matrix(self) -> np.ndarray:
        return np.array([[self.c2, self.c6], [self.c6, self.c4]])

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3, self.c4, self.c5, self.c6])


@dataclass(frozen=True, eq=False)
class AsymptoticCovariance:
    """Limit covariances.

    Attributes
    ----------
    d_mat : ndarray (4, 4)
        Limit of the predictable quadratic variation of the scaled score.
    e_mat : ndarray (4, 4)
        Asymptotic covariance of ``sqrt(n)`` times the transformed estimate error.
    j_mat, sandwich : ndarray (4, 4) or None
        Jacobian of the inverse map and ``J E J^T``; filled by
        :func:`covariance_original`.
    identity_residual : float
        Max abs entry of ``(I kron A)^{-1} D (I kron A)^{-1} - E``.
    """

    d_mat: np.ndarray
    e_mat: np.ndarray
    moments: StationaryMoments
    noise: NoiseMoments
    identity_residual: float
    j_mat: np.ndarray | None = None
    sandwich: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "d": self.d_mat.tolist(),
            "e": self.e_mat.tolist(),
            "j": None if self.j_mat is None else self.j_mat.tolist(),
            "sandwich": None if self.sandwich is None else self.sandwich.tolist(),
            "moments": {"m1": self.moments.m1, "m2": self.moments.m2, "m3": self.moments.m3},
            "noise": dict(zip(("c1", "c2", "c3", "c4", "c5", "c6"), self.noise.as_array().tolist())),
            "identity_residual": self.identity_residual,
        }
        return out


def stationary_moments(a: float, b: float, sigma1: float) -> StationaryMoments:
    """``E Y^k`` for ``k = 1, 2, 3`` under Gamma(2a/sigma1^2, rate 2b/sigma1^2)."""
    s2 = sigma1 * sigma1
    return StationaryMoments(
        m1=a / b,
        m2=(2 * a + s2) * a / (2 * b * b),
        m3=(2 * a + s2) * (a + s2) * a / (2 * b**3),
    )


def noise_moments(p: HestonParams) -> NoiseMoments:
    a, b, beta = p.a, p.b, p.beta
    s1, s2, rho = p.sigma1, p.sigma2, p.rho
    cross = beta * s1 * s2 * rho
    return NoiseMoments(
        c1=s1 * s1 * _K1(b),
        c2=a * s1 * s1 * _K2(b),
        c3=beta * beta * s1 * s1 * _T3A(b) - 2 * cross * _T3B(b) + s2 * s2 * _T3C(b),
        c4=a * (beta * beta * s1 * s1 * _T4A(b) + s2 * s2 * _T4B(b) - 2 * cross * _T4C(b)),
        c5=-beta * s1 * s1 * _T5A(b) + s1 * s2 * rho * math.exp(-b),
        c6=a * (-beta * s1 * s1 * _T6A(b) + s1 * s2 * rho * _T6B(b)),
    )


def _moment_matrices(a: float, b: float, sigma1: float) -> tuple[np.ndarray, np.ndarray]:
    s2 = sigma1 * sigma1
    k = (2 * a + s2) / s2
    m1 = np.array([[a * k / b, -k], [-k, 2 * b * (a + s2) / (a * s2)]])
    m2 = np.array([[k, -2 * b / s2], [-2 * b / s2, 2 * b * b / (a * s2)]])
    return m1, m2


def covariance_e(p: HestonParams) -> AsymptoticCovariance:
    """``D`` and ``E`` for the transformed estimator (``j_mat``/``sandwich`` unset)."""
    mom = stationary_moments(p.a, p.b, p.sigma1)
    noise = noise_moments(p)
    slope, intercept = noise.slope_matrix(), noise.intercept_matrix()
    d_mat = np.kron(slope, mom.second_gram()) + np.kron(intercept, mom.first_gram())
    m1, m2 = _moment_matrices(p.a, p.b, p.sigma1)
    e_mat = np.kron(slope, m1) + np.kron(intercept, m2)
    e_mat = 0.5 * (e_mat + e_mat.T)
    outer = np.kron(np.eye(2), np.linalg.inv(mom.first_gram()))
    residual = float(np.max(np.abs(outer @ d_mat @ outer - e_mat)))
    return AsymptoticCovariance(
        d_mat=d_mat, e_mat=e_mat, moments=mom, noise=noise, identity_residual=residual
    )


def covariance_original(p: HestonParams) -> AsymptoticCovariance:
    """Adds ``J`` and ``J E J^T`` for the drift-parameter estimator."""
    cov = covariance_e(p)
    j_mat = delta_jacobian(forward_transform(p))
    sandwich = j_mat @ cov.e_mat @ j_mat.T
    sandwich = 0.5 * (sandwich + sandwich.T)
    return AsymptoticCovariance(
        d_mat=cov.d_mat,
        e_mat=cov.e_mat,
        moments=cov.moments,
        noise=cov.noise,
        identity_residual=cov.identity_residual,
        j_mat=j_mat,
        sandwich=sandwich,
    )


@dataclass(frozen=True, eq=False)
class ConfidenceIntervals:
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    names: tuple[str, ...] = field(default=PARAM_NAMES)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def covers(self, truth) -> np.ndarray:
        truth = np.asarray(truth, dtype=float)
        return (self.lower <= truth) & (truth <= self.upper)

    def to_dict(self) -> dict:
        return {
            name: {"estimate": float(e), "lower": float(lo), "upper": float(hi)}
            for name, e, lo, hi in zip(self.names, self.estimate, self.lower, self.upper)
        } | {"level": self.level}


def confidence_intervals(
    est: ClseResult, p: HestonParams, level: float = 0.95, plugin: bool = True
) -> ConfidenceIntervals:
    """Wald intervals ``theta_k +- z sqrt(S_kk / n)`` for ``(a, b, alpha, beta)``.

    ``p`` supplies the known ``sigma1, sigma2, rho``.  With ``plugin=True`` the
    covariance ``S = J E J^T`` is evaluated at the estimate, otherwise at the
    drift parameters of ``p``.
    """
    if est.original is None:
        raise MissingOriginal("estimate fell outside the image of the forward map; no intervals")
    if not 0.0 <= level < 1.0:
        raise ValueError(f"level must lie in [0, 1), got {level}")
    o = est.original
    at = p.replace(a=o.a, b=o.b, alpha=o.alpha, beta=o.beta) if plugin else p
    sandwich = covariance_original(at).sandwich
    z = stats.norm.ppf(0.5 * (1.0 + level))
    half = z * np.sqrt(np.diag(sandwich) / est.n)
    theta = o.as_array()
    return ConfidenceIntervals(estimate=theta, lower=theta - half, upper=theta + half, level=level)
