import math

import numpy as np
import pytest
from scipy import stats

from heston_clse.errors import ConfigError
from heston_clse.model import HestonParams, forward_transform
from heston_clse.simulate import (
    ObservationSeries,
    Scheme,
    SimulationConfig,
    simulate_path,
    simulate_transitions,
    stationary_sample,
)


def within_se(sample, expected, k):
    se = sample.std(ddof=1) / math.sqrt(sample.size)
    return abs(sample.mean() - expected) <= k * se


class TestConfig:
    def test_rejects_zero_substeps(self):
        with pytest.raises(ConfigError):
            SimulationConfig(substeps=0)

    def test_rejects_unknown_scheme(self):
        with pytest.raises(ConfigError):
            SimulationConfig(scheme="Milstein")

    def test_scheme_from_string(self):
        assert SimulationConfig(scheme="EulerFullTruncation").scheme is Scheme.EULER_FULL_TRUNCATION

    def test_rejects_short_path(self, reference_params):
        with pytest.raises(ConfigError):
            simulate_path(reference_params, 1)


class TestObservationSeries:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ObservationSeries([1.0, 2.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            ObservationSeries([1.0, -2.0, 1.0], [0.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            ObservationSeries([1.0, 2.0, 1.0], [0.0, 1.0])

    def test_read_only(self):
        obs = ObservationSeries([1.0, 2.0, 3.0], [0.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            obs.y[0] = 4.0
        assert obs.n == 2


class TestSimulatePath:
    def test_initial_state_and_shape(self, reference_params):
        obs = simulate_path(reference_params.replace(y0=2.5, x0=-1.0), 50)
        assert obs.y.size == obs.x.size == 51
        assert obs.y[0] == 2.5 and obs.x[0] == -1.0
        assert np.all(obs.y >= 0)

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_deterministic(self, reference_params, scheme):
        cfg = SimulationConfig(seed=42, scheme=scheme)
        a = simulate_path(reference_params, 200, cfg)
        b = simulate_path(reference_params, 200, cfg)
        assert a == b
        assert a.y.tobytes() == b.y.tobytes() and a.x.tobytes() == b.x.tobytes()

    def test_streams_differ(self, reference_params):
        cfg = SimulationConfig(seed=42)
        assert simulate_path(reference_params, 20, cfg, (0, 1)) != simulate_path(reference_params, 20, cfg, (0, 2))
        assert simulate_path(reference_params, 20, cfg) != simulate_path(reference_params, 20, SimulationConfig(seed=43))

    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_noise_free_limit(self, scheme):
        p = HestonParams(a=1.0, b=0.7, alpha=0.2, beta=0.5, sigma1=1e-8, sigma2=1e-8, rho=0.3, y0=3.0)
        # Euler's drift error is first order in the step; give it a finer grid
        substeps = 64 if scheme is Scheme.EXACT_CIR else 4096
        obs = simulate_path(p, 10, SimulationConfig(seed=1, scheme=scheme, substeps=substeps))
        t = np.arange(11)
        ode = np.exp(-p.b * t) * p.y0 + p.a / p.b * (1 - np.exp(-p.b * t))
        np.testing.assert_allclose(obs.y, ode, atol=1e-4)
        # X follows the integrated drift, which is affine in the lagged Y
        tp = forward_transform(p)
        np.testing.assert_allclose(np.diff(obs.x), tp.gamma + tp.delta * obs.y[:-1], atol=1e-4)

    def test_nonnegative_with_feller_violation(self):
        p = HestonParams(a=0.05, b=1.0, sigma1=1.5, y0=0.1)
        for scheme in Scheme:
            obs = simulate_path(p, 2000, SimulationConfig(seed=3, scheme=scheme, substeps=8))
            assert np.all(obs.y >= 0)


class TestTransitions:
    def test_mean_at_unit_time(self):
        # a/b = 1 and y0 = 1, so E[Y_1] = 1
        p = HestonParams(a=1.0, b=1.0, sigma1=0.4, y0=1.0)
        y1, _ = simulate_transitions(p, 100_000, SimulationConfig(seed=5, substeps=16))
        assert within_se(y1, 1.0, 3)

    @pytest.mark.parametrize("y0", [0.5, 2.0])
    def test_conditional_means(self, reference_params, y0):
        p = reference_params.replace(y0=y0)
        t = forward_transform(p)
        y1, dx = simulate_transitions(p, 100_000, SimulationConfig(seed=17, substeps=32))
        assert within_se(y1, t.d * y0 + t.c, 4)
        assert within_se(dx, t.delta * y0 + t.gamma, 4)

    def test_scheme_cross_validation(self, reference_params):
        count = 20_000
        exact = simulate_transitions(reference_params, count, SimulationConfig(seed=1, substeps=64))
        euler = simulate_transitions(
            reference_params, count, SimulationConfig(seed=2, substeps=512, scheme=Scheme.EULER_FULL_TRUNCATION)
        )
        for u, v in zip(exact, euler):
            se = math.sqrt(u.var() / count + v.var() / count)
            assert abs(u.mean() - v.mean()) <= 4 * se
            # variance of a sample variance ~ (m4 - s^4)/count
            se_var = math.sqrt(
                (np.mean((u - u.mean()) ** 4) - u.var() ** 2) / count
                + (np.mean((v - v.mean()) ** 4) - v.var() ** 2) / count
            )
            assert abs(u.var() - v.var()) <= 4 * se_var


class TestStationarySample:
    def test_moments(self):
        p = HestonParams(a=1.0, b=1.0, sigma1=1.0)
        draws = stationary_sample(p, 1_000_000, seed=1)
        assert within_se(draws, 1.0, 3)
        assert within_se(draws**2, 1.5, 3)

    def test_exponential_special_case(self):
        # shape 2a/sigma1^2 = 1
        p = HestonParams(a=0.5, b=2.0, sigma1=1.0)
        draws = stationary_sample(p, 20_000, seed=4)
        assert stats.kstest(draws, "expon", args=(0, 1 / 4.0)).pvalue > 0.01
