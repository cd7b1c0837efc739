"""Independent quadrature evaluation of the innovation-moment constants.

Each constant is computed from its defining iterated integral over the unit
interval by nested adaptive Gauss-Kronrod quadrature, with no closed-form
simplification.  This is the check for the hard-coded closed forms in
:mod:`heston_clse.asymptotics`, not a replacement for them.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numba
from numba import types
from scipy import LowLevelCallable, integrate

from .asymptotics import NoiseMoments
from .model import HestonParams

__all__ = ["iterated_integral", "noise_moments_quadrature"]

EPSABS = 1e-12
EPSREL = 1e-12

Bound = Callable[..., tuple[float, float]]

_CSIG = types.double(types.intc, types.CPointer(types.double))


# Compiled innermost integrands for the two deepest integrals.  QUADPACK
# calls them as f(n, xx) with xx = (innermost variable, outer variables..., b).
@numba.cfunc(_CSIG, cache=True)
def _c3_inner(n, xx):  # exp(-b (u + v - w)), innermost w
    return math.exp(-xx[3] * (xx[1] + xx[2] - xx[0]))


@numba.cfunc(_CSIG, cache=True)
def _c4_inner(n, xx):  # exp(-b (u + v - w - z)), innermost z
    return math.exp(-xx[4] * (xx[1] + xx[2] - xx[3] - xx[0]))


def _compiled(func) -> LowLevelCallable:
    return LowLevelCallable(func.ctypes)


def _unit(*_):
    return 0.0, 1.0


def _upto(index: int) -> Bound:
    return lambda *outer: (0.0, outer[index])


def _upto_min(i: int, j: int) -> Bound:
    return lambda *outer: (0.0, min(outer[i], outer[j]))


def iterated_integral(
    f: Callable[..., float],
    bounds: Sequence[Bound],
    kinks: Sequence[Callable[..., list[float]] | None] | None = None,
    extra: tuple[float, ...] = (),
    _outer: tuple[float, ...] = (),
) -> float:
    """``int f(t_1, ..., t_k)`` with ``t_1`` outermost.

    ``bounds[i]`` maps the outer variables ``t_1..t_i`` to the limits of
    ``t_{i+1}``; ``kinks[i]`` optionally returns interior breakpoints where the
    inner integrand is not smooth.

    ``f`` may also be a :class:`scipy.LowLevelCallable`, which receives
    ``(t_k, t_1, ..., t_{k-1}, *extra)``.
    """
    level = len(_outer)
    lo, hi = bounds[level](*_outer)
    if hi <= lo:
        return 0.0
    points = None
    if kinks is not None and kinks[level] is not None:
        points = [pt for pt in kinks[level](*_outer) if lo < pt < hi] or None
    if level == len(bounds) - 1 and isinstance(f, LowLevelCallable):
        value, _ = integrate.quad(
            f, lo, hi, args=_outer + tuple(extra), epsabs=EPSABS, epsrel=EPSREL, points=points, limit=200
        )
        return value
    if level == len(bounds) - 1:
        def g(t):
            return f(*_outer, t)
    else:
        def g(t):
            return iterated_integral(f, bounds, kinks, extra, _outer + (t,))
    value, _ = integrate.quad(g, lo, hi, epsabs=EPSABS, epsrel=EPSREL, points=points, limit=200)
    return value


def noise_moments_quadrature(p: HestonParams) -> NoiseMoments:
    """C1..C6 by quadrature of their iterated-integral definitions."""
    a, b, beta = p.a, p.b, p.beta
    s1, s2, rho = p.sigma1, p.sigma2, p.rho
    exp = math.exp
    # the u ^ v cut makes the second-level integrand kinked at v = u
    kink_at_u = [None, lambda u: [u], None, None]

    c1 = s1**2 * iterated_integral(lambda v: exp(-b * (2 - v)), [_unit])
    c2 = s1**2 * a * iterated_integral(
        lambda u, v: exp(-b * (2 - v - u)), [_unit, _upto(0)]
    )

    c3 = (
        beta**2 * s1**2 * iterated_integral(
            _compiled(_c3_inner), [_unit, _unit, _upto_min(0, 1)], kink_at_u, extra=(b,)
        )
        - 2 * beta * s1 * s2 * rho * iterated_integral(
            lambda u, v: exp(-b * u), [_unit, _upto(0)]
        )
        + s2**2 * iterated_integral(lambda u: exp(-b * u), [_unit])
    )
    c4 = (
        a * beta**2 * s1**2 * iterated_integral(
            _compiled(_c4_inner),
            [_unit, _unit, _upto_min(0, 1), _upto(2)],
            kink_at_u,
            extra=(b,),
        )
        + a * s2**2 * iterated_integral(lambda u, v: exp(-b * (u - v)), [_unit, _upto(0)])
        - 2 * a * beta * s1 * s2 * rho * iterated_integral(
            lambda u, v, w: exp(-b * (u - w)), [_unit, _upto(0), _upto(1)]
        )
    )
    c5 = (
        -beta * s1**2 * iterated_integral(
            lambda u, v: exp(-b * (u - v + 1)), [_unit, _upto(0)]
        )
        + s1 * s2 * rho * exp(-b)
    )
    c6 = (
        -a * beta * s1**2 * iterated_integral(
            lambda u, v, s: exp(-b * (u - v - s + 1)), [_unit, _upto(0), _upto(1)]
        )
        + a * s1 * s2 * rho * iterated_integral(
            lambda v, s: exp(-b * (1 - s)), [_unit, _upto(0)]
        )
    )
    return NoiseMoments(c1, c2, c3, c4, c5, c6)
