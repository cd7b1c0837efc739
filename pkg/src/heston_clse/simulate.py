"""Path simulation for the Heston model at unit-spaced observation times.

Two schemes are provided:

``ExactCIR``
    The variance is sampled from the exact CIR transition law on an internal
    grid of ``substeps`` points per unit interval (a Poisson mixture of Gamma
    variables, i.e. a scaled noncentral chi-square).  The log-price is advanced
    conditionally on the variance path: the ``W``-driven part is recovered from
    the identity ``sigma1 int sqrt(Y) dW = dY - a dt + b int Y du`` and the
    ``B``-driven part is Gaussian with variance ``(1 - rho^2) sigma2^2 int Y du``.
    ``int Y du`` uses the trapezoid rule on the sub-grid.

``EulerFullTruncation``
    Euler-Maruyama with the drift and diffusion evaluated at ``max(Y, 0)``;
    used as an independent cross-check of the exact scheme.

Every path draws from its own :class:`numpy.random.Generator`, seeded by
``SeedSequence(seed, spawn_key=stream)``, so paths are reproducible no matter
which worker generates them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError
from .model import HestonParams

__all__ = [
    "Scheme",
    "SimulationConfig",
    "ObservationSeries",
    "make_generator",
    "simulate_path",
    "simulate_transitions",
    "stationary_sample",
]

# above this noncentral chi-square mean the transition is sampled from its
# moment-matched normal law (Poisson parameters would overflow otherwise)
_NORMAL_SWITCH = 1e12


class Scheme(str, enum.Enum):
    EXACT_CIR = "ExactCIR"
    EULER_FULL_TRUNCATION = "EulerFullTruncation"


@dataclass(frozen=True)
class SimulationConfig:
    """Simulation controls.

    Attributes
    ----------
    substeps : int
        Internal grid points per unit observation interval.
    seed : int
        Root seed (unsigned 64-bit).
    scheme : Scheme
        Discretisation used for the variance process.
    """

    substeps: int = 64
    seed: int = 0
    scheme: Scheme = Scheme.EXACT_CIR

    def __post_init__(self):
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ConfigError(f"substeps must be a positive integer, got {self.substeps!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "substeps", int(self.substeps))
        object.__setattr__(self, "seed", int(self.seed))
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError as exc:
            raise ConfigError(f"unknown scheme {self.scheme!r}") from exc


@dataclass(frozen=True, eq=False)
class ObservationSeries:
    """Observations ``(Y_i, X_i)`` at integer times ``i = 0..n``."""

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64)
        x = np.array(self.x, dtype=np.float64)
        if y.ndim != 1 or x.ndim != 1 or y.shape != x.shape:
            raise ValueError(f"y and x must be 1-d arrays of equal length, got {y.shape} and {x.shape}")
        if y.size < 3:
            raise ValueError(f"need at least 3 observations (n >= 2), got {y.size}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("observations must be finite")
        if np.any(y < 0):
            raise ValueError("variance observations must be nonnegative")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        """Number of unit-spaced increments."""
        return self.y.size - 1

    def __eq__(self, other):
        if not isinstance(other, ObservationSeries):
            return NotImplemented
        return np.array_equal(self.y, other.y) and np.array_equal(self.x, other.x)

    def __len__(self):
        return self.y.size


def make_generator(seed: int, stream: tuple[int, ...] = ()) -> np.random.Generator:
    """Independent generator for the stream ``stream`` under root ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


@numba.njit(nogil=True, cache=True)
def _cir_exact_step(rng, y, ebh, kappa, half_df):
    lam = y * ebh / kappa
    mean = 2.0 * half_df + lam
    if mean > _NORMAL_SWITCH:
        draw = mean + math.sqrt(2.0 * (2.0 * half_df + 2.0 * lam)) * rng.standard_normal()
        return max(kappa * draw, 0.0)
    count = rng.poisson(0.5 * lam) if lam > 0.0 else 0
    return 2.0 * kappa * rng.standard_gamma(half_df + count)


@numba.njit(nogil=True, cache=True)
def _exact_unit(rng, y, a, b, alpha, beta, s1, s2, rho, m):
    """Advance (Y, X) over one unit interval; returns (Y_1, X_1 - X_0)."""
    h = 1.0 / m
    ebh = math.exp(-b * h)
    kappa = s1 * s1 * (-math.expm1(-b * h)) / (4.0 * b)
    half_df = 2.0 * a / (s1 * s1)
    rho_bar = math.sqrt(1.0 - rho * rho)
    dx = 0.0
    for _ in range(m):
        y_new = _cir_exact_step(rng, y, ebh, kappa, half_df)
        integral = 0.5 * h * (y + y_new)
        w_part = (y_new - y - a * h + b * integral) / s1
        dx += (
            alpha * h
            - beta * integral
            + s2 * rho * w_part
            + s2 * rho_bar * math.sqrt(integral) * rng.standard_normal()
        )
        y = y_new
    return y, dx


@numba.njit(nogil=True, cache=True)
def _euler_unit(rng, y, a, b, alpha, beta, s1, s2, rho, m):
    """Full-truncation Euler over one unit interval; ``y`` may be negative."""
    h = 1.0 / m
    sqh = math.sqrt(h)
    rho_bar = math.sqrt(1.0 - rho * rho)
    dx = 0.0
    for _ in range(m):
        yp = max(y, 0.0)
        vol = math.sqrt(yp) * sqh
        z1 = rng.standard_normal()
        z2 = rng.standard_normal()
        dx += (alpha - beta * yp) * h + s2 * vol * (rho * z1 + rho_bar * z2)
        y = y + (a - b * yp) * h + s1 * vol * z1
    return y, dx


@numba.njit(nogil=True, cache=True)
def _path_kernel(rng, exact, a, b, alpha, beta, s1, s2, rho, y0, x0, n, m, y_out, x_out):
    y = y0
    x = x0
    y_out[0] = y0
    x_out[0] = x0
    for i in range(n):
        if exact:
            y, dx = _exact_unit(rng, y, a, b, alpha, beta, s1, s2, rho, m)
        else:
            y, dx = _euler_unit(rng, y, a, b, alpha, beta, s1, s2, rho, m)
        x += dx
        y_out[i + 1] = max(y, 0.0)
        x_out[i + 1] = x


@numba.njit(nogil=True, cache=True)
def _transition_kernel(rng, exact, a, b, alpha, beta, s1, s2, rho, y0, m, y_out, dx_out):
    for j in range(y_out.size):
        if exact:
            y, dx = _exact_unit(rng, y0, a, b, alpha, beta, s1, s2, rho, m)
        else:
            y, dx = _euler_unit(rng, y0, a, b, alpha, beta, s1, s2, rho, m)
        y_out[j] = max(y, 0.0)
        dx_out[j] = dx


def _model_args(p: HestonParams):
    return (p.a, p.b, p.alpha, p.beta, p.sigma1, p.sigma2, p.rho)


def simulate_path(
    p: HestonParams,
    n: int,
    cfg: SimulationConfig | None = None,
    stream: tuple[int, ...] = (),
) -> ObservationSeries:
    """Simulate ``(Y_i, X_i)`` for ``i = 0..n`` starting from ``(p.y0, p.x0)``.

    Parameters
    ----------
    p : HestonParams
    n : int
        Number of unit-spaced increments, at least 2.
    cfg : SimulationConfig, optional
    stream : tuple of int
        Spawn key selecting an independent random stream under ``cfg.seed``.
        Monte Carlo drivers pass ``(grid_index, replicate)``.

    Returns
    -------
    ObservationSeries
        Bit-identical for identical ``(p, n, cfg, stream)``.
    """
    cfg = cfg or SimulationConfig()
    if int(n) != n or n < 2:
        raise ConfigError(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    rng = make_generator(cfg.seed, stream)
    y = np.empty(n + 1)
    x = np.empty(n + 1)
    _path_kernel(
        rng, cfg.scheme is Scheme.EXACT_CIR, *_model_args(p), p.y0, p.x0, n, cfg.substeps, y, x
    )
    return ObservationSeries(y, x)


def simulate_transitions(
    p: HestonParams,
    count: int,
    cfg: SimulationConfig | None = None,
    stream: tuple[int, ...] = (),
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` independent unit-time transitions from ``Y_0 = p.y0``.

    Returns
    -------
    y1, dx : ndarray
        Terminal variance ``Y_1`` and log-price increment ``X_1 - X_0``.
    """
    cfg = cfg or SimulationConfig()
    rng = make_generator(cfg.seed, stream)
    y1 = np.empty(int(count))
    dx = np.empty(int(count))
    _transition_kernel(
        rng, cfg.scheme is Scheme.EXACT_CIR, *_model_args(p), p.y0, cfg.substeps, y1, dx
    )
    return y1, dx


def stationary_sample(p: HestonParams, count: int, seed: int = 0) -> np.ndarray:
    """I.i.d. draws from the stationary law Gamma(2a/sigma1^2, rate 2b/sigma1^2)."""
    rng = make_generator(seed)
    shape = 2.0 * p.a / p.sigma1**2
    scale = p.sigma1**2 / (2.0 * p.b)
    return rng.gamma(shape, scale, size=int(count))
