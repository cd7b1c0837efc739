"""Conditional least squares estimation from unit-spaced observations.

The objective

    f(c, d, gamma, delta) = sum_i (Y_i - c - d Y_{i-1})^2
                          + sum_i (X_i - X_{i-1} - gamma - delta Y_{i-1})^2

separates into two ordinary regressions on the same regressor ``(1, Y_{i-1})``,
so the minimiser is ``(I_2 kron G^{-1}) r`` with Gram matrix
``G = [[n, S1], [S1, S2]]``.  The drift parameters are recovered by the inverse
reparametrisation whenever the estimate lands in its domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularGramError
from .model import DriftParams, TransformedParams, inverse_transform
from .simulate import ObservationSeries

__all__ = [
    "ClseResult",
    "clse_transformed",
    "clse_original",
    "residuals",
    "objective",
    "GRAM_TOL",
]

GRAM_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class ClseResult:
    """Estimate in both parametrisations.

    ``original`` is ``None`` when ``(c, d)`` falls outside ``(0, inf) x (0, 1)``;
    this is an expected finite-sample outcome, not an error.
    """

    transformed: TransformedParams
    original: DriftParams | None
    n: int
    gram: np.ndarray

    @property
    def out_of_image(self) -> bool:
        return self.original is None

    def to_dict(self) -> dict:
        t = self.transformed
        o = self.original
        return {
            "c": t.c,
            "d": t.d,
            "gamma": t.gamma,
            "delta": t.delta,
            "a": o.a if o else None,
            "b": o.b if o else None,
            "alpha": o.alpha if o else None,
            "beta": o.beta if o else None,
            "out_of_image": self.out_of_image,
            "n": self.n,
        }


def _sufficient_statistics(obs: ObservationSeries):
    y, x = obs.y, obs.x
    lag = y[:-1]
    lead = y[1:]
    dx = np.diff(x)
    n = lag.size
    s1 = math.fsum(lag)
    s2 = math.fsum(lag * lag)
    rhs = np.array(
        [
            math.fsum(lead),
            math.fsum(lead * lag),
            x[-1] - x[0],
            math.fsum(dx * lag),
        ]
    )
    # n * sum (Y - mean)^2 equals n*S2 - S1^2 without the cancellation
    centred = lag - s1 / n
    det = n * math.fsum(centred * centred)
    return n, s1, s2, det, rhs


def _solve(obs: ObservationSeries):
    n, s1, s2, det, rhs = _sufficient_statistics(obs)
    gram = np.array([[n, s1], [s1, s2]], dtype=float)
    if not det > GRAM_TOL * n * s2:
        raise SingularGramError(
            f"Gram matrix is singular (n*S2 - S1^2 = {det:g}); the lagged variance observations are constant"
        )
    gram_inv = np.array([[s2, -s1], [-s1, n]]) / det
    theta = np.kron(np.eye(2), gram_inv) @ rhs
    return TransformedParams.from_array(theta), gram


def clse_transformed(obs: ObservationSeries) -> TransformedParams:
    """Closed-form CLSE of ``(c, d, gamma, delta)``.

    Raises
    ------
    SingularGramError
        If ``Y_0, ..., Y_{n-1}`` are (numerically) all equal.

    Examples
    --------
    >>> obs = ObservationSeries([1.0, 2.0, 3.0], [0.0, 1.0, 3.0])
    >>> clse_transformed(obs).as_array().round(12).tolist()
    [1.0, 1.0, 0.0, 1.0]
    """
    return _solve(obs)[0]


def clse_original(obs: ObservationSeries) -> ClseResult:
    """CLSE of ``(c, d, gamma, delta)`` together with the implied ``(a, b, alpha, beta)``."""
    transformed, gram = _solve(obs)
    original = inverse_transform(transformed) if transformed.in_image else None
    return ClseResult(transformed=transformed, original=original, n=obs.n, gram=gram)


def residuals(obs: ObservationSeries, t: TransformedParams) -> tuple[np.ndarray, np.ndarray]:
    """One-step innovations ``eps_i = Y_i - c - d Y_{i-1}`` and
    ``eta_i = X_i - X_{i-1} - gamma - delta Y_{i-1}`` for ``i = 1..n``."""
    lag = obs.y[:-1]
    eps = obs.y[1:] - t.c - t.d * lag
    eta = np.diff(obs.x) - t.gamma - t.delta * lag
    return eps, eta


def objective(obs: ObservationSeries, t: TransformedParams) -> float:
    eps, eta = residuals(obs, t)
    return math.fsum(eps * eps) + math.fsum(eta * eta)
