"""Data-generating process tests: reproducibility, stationarity, stopping
rules and the adaptedness of budget-based sampling."""

import math

import numpy as np
import pytest
from scipy.stats import kstest

from lepski import (
    ExplosiveChain,
    NoiseSpec,
    autoregressive_spec,
    budget_stop,
    gaussian_design,
    gaussian_noise,
    iid_regression_spec,
    martingale_residuals,
    mixing_ar1_spec,
    power_law_design,
    simulate,
    transient_walk_spec,
    uniform_design,
)
from lepski.dgp import FixedN, run_budget_stop


def zero_f(rows):
    return np.zeros(np.atleast_2d(rows).shape[0])


def silent_noise():
    """zeta = 0 surely; a valid martingale increment with any mu and gamma > 1."""
    return NoiseSpec("silent", 2, 0.25, 1.0001,
                     lambda rng, size: np.zeros(size), 0.0)


class TestSimulate:
    def test_noiseless_zero_function(self):
        spec = iid_regression_spec(zero_f, silent_noise(), n=50)
        s = simulate(spec, 0)
        assert np.all(s.y_obs == 0.0)
        assert np.all(s.sigma == 1.0)  # sigma stays a positive upper bound

    def test_fixed_n_exact(self):
        for n in (1, 7, 500):
            spec = iid_regression_spec(zero_f, n=n)
            assert simulate(spec, 1).n_stop == n

    def test_seed_reproducibility_bit_identical(self):
        spec = mixing_ar1_spec(zero_f, rho=0.7, stopping=FixedN(300))
        a = simulate(spec, 42)
        b = simulate(spec, 42)
        np.testing.assert_array_equal(a.x_obs, b.x_obs)
        np.testing.assert_array_equal(a.y_obs, b.y_obs)
        np.testing.assert_array_equal(a.sigma, b.sigma)
        c = simulate(spec, 43)
        assert not np.array_equal(a.y_obs, c.y_obs)

    def test_truth_attached(self):
        f = lambda rows: 2.0 * np.atleast_2d(rows)[:, 0]
        spec = iid_regression_spec(f, n=20)
        s = simulate(spec, 3)
        np.testing.assert_allclose(s.truth_values(), 2.0 * s.x_obs[:, 0])


class TestMixingAr1:
    def test_stationary_marginal_ks(self):
        spec = mixing_ar1_spec(zero_f, rho=0.5, stopping=FixedN(100_000))
        s = simulate(spec, 7)
        stat = kstest(s.x_obs[:, 0], "norm").statistic
        assert stat < 0.02

    def test_stationary_mean_and_variance(self):
        rho, n = 0.5, 100_000
        spec = mixing_ar1_spec(zero_f, rho=rho, stopping=FixedN(n))
        x = simulate(spec, 11).x_obs[:, 0]
        # effective sample size under AR(1) correlation
        n_eff = n * (1 - rho) / (1 + rho)
        assert abs(x.mean()) < 4 / math.sqrt(n_eff)
        assert abs(x.var() - 1.0) < 4 * math.sqrt(2.0 / n_eff)

    def test_recursion_exact(self):
        # X_k = rho X_{k-1} + sqrt(1-rho^2) xi_k reproduced against a direct loop
        rho = 0.3
        spec = mixing_ar1_spec(zero_f, rho=rho, stopping=FixedN(200))
        x = simulate(spec, 5).x_obs[:, 0]
        rng = np.random.default_rng(5)
        x0 = rng.standard_normal()
        xi = rng.standard_normal(199)
        manual = [x0]
        for e in xi:
            manual.append(rho * manual[-1] + math.sqrt(1 - rho**2) * e)
        np.testing.assert_allclose(x, manual, rtol=1e-12)

    def test_px_form_matches_declaration(self):
        assert gaussian_design(0.0).check_declaration(1.0)
        assert uniform_design(0.0, 2.0).check_declaration(2.0)
        assert power_law_design(0.0, 1.0, tau=1.0).check_declaration(1.0)

    def test_power_law_design_empirical(self):
        law = power_law_design(0.0, 1.0, tau=1.0)
        rng = np.random.default_rng(13)
        x = law.sampler(rng, 200_000)[:, 0]
        for h in (0.25, 0.5, 0.75):
            emp = np.mean(np.abs(x) <= h)
            assert emp == pytest.approx(law.interval_prob(h), abs=0.005)


class TestTransientWalk:
    def test_walk_leaves_neighbourhood(self):
        spec = transient_walk_spec(zero_f, x_start=0.0, drift=0.5, step_sd=0.3,
                                   stopping=FixedN(2000))
        s = simulate(spec, 1)
        near = np.abs(s.x_obs[:, 0]) <= 1.0
        assert near[0]                      # starts at the estimation point
        assert near.sum() < 100             # then drifts away for good
        assert not near[-1]


class TestAutoregressive:
    def test_explosive_chain_guard(self):
        spec = autoregressive_spec([[1.8]], stopping=FixedN(200), magnitude_guard=1e3)
        with pytest.raises(ExplosiveChain):
            simulate(spec, 2)

    def test_vector_ar_shapes_and_truth(self):
        a = [[0.5, 0.1], [0.0, 0.3]]
        spec = autoregressive_spec(a, y_coord=0, stopping=FixedN(400))
        s = simulate(spec, 3)
        assert s.dim == 2 and s.n_stop == 400
        # Y_k is the observed coordinate of X_k; truth is the conditional mean map
        expected = s.truth_values()
        resid = s.y_obs - expected
        assert abs(resid.mean()) < 4 / math.sqrt(s.n_stop)

    def test_ar1_scalar_is_regression_on_past(self):
        spec = autoregressive_spec([[0.5]], stopping=FixedN(300))
        s = simulate(spec, 4)
        np.testing.assert_allclose(s.truth_values(), 0.5 * s.x_obs[:, 0], rtol=1e-12)


class TestResiduals:
    def test_noiseless_residuals_zero(self):
        spec = iid_regression_spec(zero_f, silent_noise(), n=100)
        np.testing.assert_array_equal(martingale_residuals(simulate(spec, 0)), 0.0)

    def test_unit_scale_residuals_are_innovations(self):
        f = lambda rows: np.atleast_2d(rows)[:, 0] ** 2
        spec = iid_regression_spec(f, gaussian_noise(), n=10_000)
        s = simulate(spec, 9)
        eps = martingale_residuals(s)
        assert abs(eps.mean()) < 4 / math.sqrt(s.n_stop)
        assert eps.std() == pytest.approx(1.0, rel=0.05)

    def test_martingale_orthogonality_smoke(self):
        # eps_k g(X_{k-1}) averages to O(n^{-1/2}) for adapted g
        spec = mixing_ar1_spec(zero_f, rho=0.5, stopping=FixedN(100_000))
        s = simulate(spec, 21)
        eps = martingale_residuals(s)
        g = np.tanh(s.x_obs[:, 0])
        assert abs(np.mean(eps * g)) < 4 / math.sqrt(s.n_stop)


class TestBudgetStop:
    def test_constant_cost_floor(self):
        spec = iid_regression_spec(zero_f, stopping=budget_stop(lambda hist: 2.0, 17.0))
        assert simulate(spec, 0).n_stop == 8  # floor(17/2)

    def test_unit_cost_fractional_budget(self):
        spec = iid_regression_spec(zero_f, stopping=budget_stop(lambda hist: 1.0, 10.5))
        assert simulate(spec, 0).n_stop == 10

    def test_state_dependent_cost_replay_oracle(self):
        # cost of observation k is 1 + |X_{k-1}|; replay the same path directly
        rule = budget_stop(lambda hist: 1.0 + abs(hist[-1, 0]), 25.0)
        spec = iid_regression_spec(zero_f, stopping=rule,
                                   design=uniform_design(0.0, 2.0))
        s = simulate(spec, 33)
        spent = np.cumsum(1.0 + np.abs(s.x_obs[:, 0]))
        assert np.all(spent <= 25.0)
        # the next observation would have pushed past the budget: replay with a
        # fresh draw stream to recover the rejected covariate
        rng = np.random.default_rng(33)
        draws = rng.uniform(-2.0, 2.0, s.n_stop + 1)
        np.testing.assert_allclose(s.x_obs[:, 0], draws[: s.n_stop])
        assert spent[-1] + 1.0 + abs(draws[s.n_stop]) > 25.0

    def test_budget_too_small_raises(self):
        spec = iid_regression_spec(zero_f, stopping=budget_stop(lambda hist: 5.0, 1.0))
        with pytest.raises(ValueError):
            simulate(spec, 0)

    def test_adaptedness_spy(self):
        # the rule only ever sees the covariate prefix X_0..X_{k-1} (k rows),
        # never a response and never the future
        seen = []

        def spy(hist):
            seen.append(hist.copy())
            return 1.0

        rule = budget_stop(spy, 5.5)
        draw = lambda k, hist: np.array([float(k)])
        x = run_budget_stop(rule, draw, 1)
        assert x.shape == (5, 1)
        sizes = [h.shape[0] for h in seen]
        assert sizes == [1, 2, 3, 4, 5, 6]  # priced obs 1..6, rejected the 6th
        for k, h in enumerate(seen, start=1):
            np.testing.assert_array_equal(h[:, 0], np.arange(k, dtype=float))
