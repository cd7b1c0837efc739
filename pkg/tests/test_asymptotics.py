import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy import integrate, stats

from heston_clse.asymptotics import (
    confidence_intervals,
    covariance_e,
    covariance_original,
    noise_moments,
    stationary_moments,
)
from heston_clse.errors import MissingOriginal
from heston_clse.estimate import ClseResult
from heston_clse.model import DriftParams, HestonParams, TransformedParams
from heston_clse.montecarlo import ExperimentConfig, run_experiment
from heston_clse.quadrature import noise_moments_quadrature
from heston_clse.simulate import SimulationConfig

from .conftest import heston_params, random_params


def gamma_moments(shape, rate):
    return (
        shape / rate,
        shape * (shape + 1) / rate**2,
        shape * (shape + 1) * (shape + 2) / rate**3,
    )


class TestStationaryMoments:
    @pytest.mark.parametrize("a, b, s1", [(1.0, 1.0, 1.0), (2.0, 0.5, 0.4), (0.3, 2.5, 1.7)])
    def test_gamma_oracle(self, a, b, s1):
        m = stationary_moments(a, b, s1)
        expected = gamma_moments(2 * a / s1**2, 2 * b / s1**2)
        np.testing.assert_allclose((m.m1, m.m2, m.m3), expected, rtol=1e-13)

    def test_unit_values(self):
        m = stationary_moments(1.0, 1.0, 1.0)
        assert (m.m1, m.m2, m.m3) == (1.0, 1.5, 3.0)

    def test_reference_values(self):
        m = stationary_moments(2.0, 0.5, 0.4)
        assert m.m1 == 4.0
        assert m.m2 == pytest.approx(16.64, rel=1e-15)
        assert m.m3 == pytest.approx(71.8848, rel=1e-14)

    def test_scale_invariant_mean(self):
        assert stationary_moments(3.0, 1.5, 0.7).m1 == stationary_moments(6.0, 3.0, 0.7).m1

    @settings(max_examples=200)
    @given(heston_params)
    def test_auxiliary_identities(self, p):
        a, b, s = p.a, p.b, p.sigma1**2
        m = stationary_moments(a, b, p.sigma1)
        m1, m2, m3 = m.m1, m.m2, m.m3
        cases = [
            ((m1 * m3 - m2**2) * m1, a**3 * s / (4 * b**5) * (2 * a + s)),
            (m1 * m3 - m2**2, a**2 * s / (4 * b**4) * (2 * a + s)),
            (m3 - 2 * m1 * m2 + m1**3, a * s / (2 * b**3) * (a + s)),
            (m2 - m1**2, a * s / (2 * b**2)),
        ]
        for lhs, rhs in cases:
            # the left-hand sides are differences; measure error on the scale of their terms
            scale = max(abs(m1 * m3 * m1), abs(m3), m2**2, m1**4, 1.0)
            assert abs(lhs - rhs) <= 1e-12 * scale
        assert m.m1 > 0 and m.m2 > m.m1**2 and m.m3 > 0


class TestNoiseMoments:
    def test_c1_unit(self):
        c = noise_moments(HestonParams(a=1.0, b=1.0, sigma1=1.0))
        oracle = integrate.quad(lambda v: math.exp(-(2 - v)), 0, 1)[0]
        assert c.c1 == pytest.approx(0.2325442, abs=1e-7)
        assert c.c1 == pytest.approx(oracle, rel=1e-13)

    def test_uncorrelated_zero_loading(self):
        p = HestonParams(a=1.3, b=0.8, alpha=2.0, beta=0.0, sigma1=0.6, sigma2=0.9, rho=0.0)
        c = noise_moments(p)
        assert c.c3 == pytest.approx(p.sigma2**2 * (1 - math.exp(-p.b)) / p.b, rel=1e-14)
        assert c.c5 == 0.0 and c.c6 == 0.0
        e = covariance_e(p).e_mat
        np.testing.assert_array_equal(e[:2, 2:], 0.0)

    def test_published_closed_forms(self, reference_params):
        p = reference_params
        b, be, s1, s2, r = p.b, p.beta, p.sigma1, p.sigma2, p.rho
        c = noise_moments(p)
        c1 = s1**2 * math.exp(-2 * b) * (math.exp(b) - 1) / b
        c3 = b**-3 * (
            2 * math.exp(-b) * be**2 * s1**2 * (math.sinh(b) - b)
            + 2 * b * be * r * s1 * s2 * ((1 + b) * math.exp(-b) - 1)
            + b**2 * s2**2 * (1 - math.exp(-b))
        )
        c5 = b**-2 * s1 * math.exp(-b) * (-math.exp(-b) * be * s1 * (1 + (b - 1) * math.exp(b)) + r * s2 * b**2)
        assert c.c1 == pytest.approx(c1, rel=1e-13)
        assert c.c3 == pytest.approx(c3, rel=1e-12)
        assert c.c5 == pytest.approx(c5, rel=1e-12)
        det = b**-4 * math.exp(-2 * b) * s1**2 * (
            2 * b * (2 + b**2) * be * r * s1 * s2
            + 2 * (be**2 * s1**2 - 2 * b * be * r * s1 * s2 + b**2 * s2**2) * math.cosh(b)
            - (2 + b**2) * be**2 * s1**2
            - b**2 * (2 + b**2 * r**2) * s2**2
        )
        assert c.c1 * c.c3 - c.c5**2 == pytest.approx(det, rel=1e-9)

    def test_reference_against_quadrature(self, reference_params):
        np.testing.assert_allclose(
            noise_moments(reference_params).as_array(),
            noise_moments_quadrature(reference_params).as_array(),
            rtol=1e-10,
        )

    @pytest.mark.parametrize("b", [1e-3, 0.2, 0.999, 1.0, 1.001, 7.0])
    def test_series_switch(self, reference_params, b):
        p = reference_params.replace(b=b)
        np.testing.assert_allclose(
            noise_moments(p).as_array(), noise_moments_quadrature(p).as_array(), rtol=1e-10
        )

    @settings(max_examples=300)
    @given(heston_params)
    def test_signs(self, p):
        c = noise_moments(p)
        assert c.c1 > 0 and c.c2 > 0
        assert c.c3 >= 0 and c.c4 >= 0
        assert c.c1 * c.c3 - c.c5**2 > 0
        assert c.c2 * c.c4 - c.c6**2 >= -1e-14 * c.c2 * c.c4


class TestCovariance:
    def test_reference(self, reference_params):
        cov = covariance_original(reference_params)
        assert cov.identity_residual <= 1e-10
        np.testing.assert_allclose(cov.e_mat, cov.e_mat.T, atol=1e-12)
        assert np.linalg.eigvalsh(cov.e_mat).min() > 0
        s = cov.sandwich
        np.testing.assert_allclose(s, s.T, atol=1e-12)
        vals = np.linalg.eigvalsh(s)
        assert vals.min() >= -1e-10 * np.linalg.norm(s)
        assert np.linalg.matrix_rank(s) == 4

    def test_d_matrix_definition(self, reference_params):
        cov = covariance_e(reference_params)
        m = cov.moments
        n = cov.noise
        expected = np.kron(n.slope_matrix(), [[m.m1, m.m2], [m.m2, m.m3]]) + np.kron(
            n.intercept_matrix(), [[1, m.m1], [m.m1, m.m2]]
        )
        np.testing.assert_allclose(cov.d_mat, expected, rtol=1e-15)

    def test_sandwich_identity_random(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            cov = covariance_e(random_params(rng))
            a = np.kron(np.eye(2), np.linalg.inv(cov.moments.first_gram()))
            np.testing.assert_allclose(a @ cov.d_mat @ a, cov.e_mat, rtol=1e-10, atol=1e-10 * np.abs(cov.e_mat).max())

    def test_alpha_invariance(self, reference_params):
        s0 = covariance_original(reference_params.replace(alpha=0.0)).sandwich
        s7 = covariance_original(reference_params.replace(alpha=7.0)).sandwich
        assert s0.tobytes() == s7.tobytes()

    @pytest.mark.slow
    def test_monte_carlo_agreement(self, reference_params):
        cfg = ExperimentConfig(
            reference_params, (10_000,), 2000, seed=99, sim=SimulationConfig(substeps=16)
        )
        rep = run_experiment(cfg)[10_000]
        theory = rep.original.theory_cov
        emp = rep.original.scaled_cov
        np.testing.assert_allclose(emp, theory, rtol=0.15)


class TestConfidenceIntervals:
    def _result(self, n=100):
        o = DriftParams(2.0, 0.5, 0.1, -1.0)
        from heston_clse.model import forward_transform

        return ClseResult(forward_transform(o), o, n, np.eye(2))

    def test_half_width_formula(self, reference_params):
        est = self._result(100)
        ci = confidence_intervals(est, reference_params, 0.95)
        z = stats.norm.ppf(0.975)
        assert z / 10 == pytest.approx(0.196, abs=1e-4)
        s = covariance_original(reference_params).sandwich
        np.testing.assert_allclose(ci.half_width, z * np.sqrt(np.diag(s) / 100), rtol=1e-12)
        assert ci.covers(est.original.as_array()).all()

    def test_zero_level(self, reference_params):
        ci = confidence_intervals(self._result(), reference_params, 0.0)
        np.testing.assert_array_equal(ci.half_width, 0.0)

    def test_plugin_uses_estimate(self, reference_params):
        est = self._result()
        shifted = reference_params.replace(a=3.0, b=1.0)
        plug = confidence_intervals(est, shifted, 0.9, plugin=True)
        fixed = confidence_intervals(est, shifted, 0.9, plugin=False)
        ref = confidence_intervals(est, reference_params, 0.9, plugin=False)
        np.testing.assert_allclose(plug.half_width, ref.half_width, rtol=1e-14)
        assert not np.allclose(fixed.half_width, ref.half_width)

    def test_missing_original(self, reference_params):
        est = ClseResult(TransformedParams(1.0, 1.2, 0.0, 0.0), None, 10, np.eye(2))
        with pytest.raises(MissingOriginal):
            confidence_intervals(est, reference_params)
