"""Stability-lab tests: closed-form constants against independently computed
values (mpmath, 40 digits), Monte Carlo bound checks at unit-test scale, the
analytic lemmas, and the tail functional.  The full 1e5-replication matrices
live in the acceptance suite."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import lepski
from lepski import (
    AdaptedScale,
    AlternatingScale,
    CensoredPathsWarning,
    ConstantScale,
    FirstCrossing,
    FixedT,
    GridConfig,
    RandomizedStop,
    c_lambda,
    c_mu,
    c_prime_lambda,
    check_lemma_cosh_sup,
    check_lemma_moment,
    empirical_pi,
    gamma_lambda,
    gaussian_noise,
    iid_regression_spec,
    lambda_max,
    mc_stability,
    mc_uniform_stability,
    pi_statistic,
    simulate_ensemble,
    truncated_laplace_noise,
    two_point_noise,
    uniform_design,
)


class TestConstants:
    def test_gamma_lambda_values(self):
        assert gamma_lambda(1.0, 2.0, 0.0) == pytest.approx(2.5, rel=1e-15)
        assert gamma_lambda(1.0, 2.0, 0.1) == pytest.approx(2.7777777777777777, rel=1e-15)

    def test_gamma_lambda_rejects_boundary(self):
        mu, gamma = 1.0, 2.0
        edge = mu / (2 * (1 + gamma))
        with pytest.raises(ValueError):
            gamma_lambda(mu, gamma, edge)
        with pytest.raises(ValueError):
            gamma_lambda(mu, gamma, -0.01)

    def test_c_lambda_value(self):
        # frozen from an independent 40-digit evaluation of the formula
        assert c_lambda(1.0, 2.0, 0.1) == pytest.approx(0.4376516517219899, rel=1e-13)
        assert round(c_lambda(1.0, 2.0, 0.1), 4) == 0.4377

    def test_c_lambda_vanishes_at_zero(self):
        assert c_lambda(1.0, 2.0, 1e-8) < 1e-6

    def test_c_lambda_monotone_and_continuous(self):
        mu, gamma = 0.25, math.sqrt(2)
        lams = np.linspace(1e-6, lambda_max(mu, gamma) * 0.999, 200)
        vals = np.array([c_lambda(mu, gamma, l) for l in lams])
        assert np.all(np.isfinite(vals)) and np.all(vals > 0)
        assert np.all(np.diff(vals) > 0)
        assert np.max(np.abs(np.diff(vals[:50]))) < 0.01  # no jumps at the small end

    def test_c_prime_value(self):
        assert c_prime_lambda(1.0, 2.0, 0.5) == pytest.approx(1.0828375327773187, rel=1e-13)

    def test_c_prime_zero_and_even(self):
        assert c_prime_lambda(1.0, 2.0, 0.0) == 0.0
        for lam in (0.1, 0.35, 0.8):
            assert c_prime_lambda(1.0, 2.0, lam) == c_prime_lambda(1.0, 2.0, -lam)

    def test_c_prime_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            c_prime_lambda(0.5, 2.0, 0.5)

    def test_c_prime_finite_positive_on_domain(self):
        mu, gamma = 0.5, 1.8482836399575129
        lams = np.linspace(-0.99 * mu, 0.99 * mu, 101)
        vals = np.array([c_prime_lambda(mu, gamma, l) for l in lams])
        assert np.all(np.isfinite(vals))
        assert np.all(vals[np.abs(lams) > 0] > 0)


class TestNoiseCertification:
    def test_gaussian_alpha2_identity(self):
        # E exp(mu Z^2) = (1 - 2 mu)^(-1/2) exactly for the standard Gaussian
        for mu in (0.1, 0.25, 0.4):
            noise = gaussian_noise(mu=mu)
            lhs, _ = quad(lambda z: math.exp((mu - 0.5) * z * z) / math.sqrt(2 * math.pi),
                          -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
            assert lhs == pytest.approx(noise.gamma, rel=1e-10)

    def test_gaussian_alpha1_quadrature(self):
        noise = gaussian_noise(mu=0.5, alpha=1)
        lhs, _ = quad(lambda z: math.exp(0.5 * abs(z) - z * z / 2) / math.sqrt(2 * math.pi),
                      -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
        assert lhs == pytest.approx(noise.gamma, rel=1e-10)
        assert noise.gamma == pytest.approx(1.5670592366928565, rel=1e-12)

    def test_truncated_laplace_quadrature(self):
        noise = truncated_laplace_noise(mu=0.5, cut=5.0)
        z_norm = 1.0 - math.exp(-5.0)
        lhs, _ = quad(lambda z: math.exp(0.5 * z) * math.exp(-z) / z_norm, 0, 5.0,
                      epsabs=1e-13, epsrel=1e-13)
        assert lhs == pytest.approx(noise.gamma, rel=1e-11)
        assert noise.gamma == pytest.approx(1.8482836399575129, rel=1e-12)

    def test_samplers_centered_and_variance(self):
        rng = np.random.default_rng(0)
        for noise in (gaussian_noise(), two_point_noise(), truncated_laplace_noise()):
            z = noise.sampler(rng, 200_000)
            assert abs(z.mean()) < 4 / math.sqrt(z.size) * math.sqrt(noise.variance)
            assert z.var() == pytest.approx(noise.variance, rel=0.02)

    def test_truncated_laplace_empirical_moment(self):
        noise = truncated_laplace_noise()
        rng = np.random.default_rng(1)
        z = noise.sampler(rng, 400_000)
        est = np.exp(noise.mu * np.abs(z)).mean()
        assert est <= noise.gamma * 1.01

    def test_predictable_variation_constant(self):
        # <M>_n = Var(zeta) V_n for conditionally iid increments; Var <= c_mu
        for noise in (gaussian_noise(), two_point_noise(), truncated_laplace_noise()):
            assert noise.variance <= c_mu(noise.alpha, noise.mu)


class TestMcStability:
    def test_zero_scales_estimate_exactly_one(self):
        noise = gaussian_noise()
        rep = mc_stability(noise, ConstantScale(0.0), FixedT(50), a=1.0,
                           lam=0.01, n_rep=500, seed=3)
        assert rep.mc_estimate == 1.0 and rep.mc_stderr == 0.0 and rep.passed

    def test_fixed_time_gaussian_passes(self):
        noise = gaussian_noise(mu=0.25)  # gamma = sqrt(2)
        rep = mc_stability(noise, ConstantScale(1.0), FixedT(200), a=5.0,
                           lam=0.05, n_rep=20_000, seed=4)
        assert rep.passed
        assert rep.mc_estimate >= 1.0
        assert rep.bound == pytest.approx(1.0 + c_lambda(0.25, math.sqrt(2), 0.05), rel=1e-14)

    def test_alpha1_cosh_passes(self):
        noise = truncated_laplace_noise()
        rep = mc_stability(noise, AlternatingScale(), FixedT(200), a=2.0,
                           lam=0.3 * noise.mu, n_rep=20_000, seed=5)
        assert rep.passed and rep.mc_estimate >= 1.0

    def test_lambda_validation(self):
        noise = gaussian_noise(mu=0.25)
        with pytest.raises(ValueError):
            mc_stability(noise, ConstantScale(), FixedT(10), a=1.0,
                         lam=lambda_max(0.25, noise.gamma), n_rep=10)
        with pytest.raises(ValueError):
            mc_stability(truncated_laplace_noise(), ConstantScale(), FixedT(10),
                         a=1.0, lam=0.51, n_rep=10)

    def test_adversarial_crossing_all_uncensored_paths_cross(self):
        # the crossing boundary is hit slowly, so the cap warning is expected here
        noise = gaussian_noise()
        stop = FirstCrossing(c=1.0, cap=3000)
        ens = simulate_ensemble(noise, ConstantScale(1.0), stop, 2000, seed=6)
        ok = ~ens.censored
        ratio = ens.m[ok] / np.sqrt(ens.v[ok])
        assert np.all(ratio >= 1.0)
        with pytest.warns(CensoredPathsWarning):
            rep = mc_stability(noise, ConstantScale(1.0), stop, a=5.0, lam=0.03,
                               n_rep=2000, seed=6)
        assert rep.passed

    def test_censored_paths_warning(self):
        noise = gaussian_noise()
        with pytest.warns(CensoredPathsWarning):
            mc_stability(noise, ConstantScale(1.0), FirstCrossing(c=3.0, cap=50),
                         a=1.0, lam=0.01, n_rep=500, seed=7)

    def test_randomized_stop_passes(self):
        noise = gaussian_noise()
        rep = mc_stability(noise, AdaptedScale(), RandomizedStop(p=0.01, cap=2000),
                           a=0.5, lam=0.04, n_rep=10_000, seed=8)
        assert rep.passed

    def test_ensemble_reproducible(self):
        noise = gaussian_noise()
        e1 = simulate_ensemble(noise, AdaptedScale(), FixedT(100), 5000, seed=9)
        e2 = simulate_ensemble(noise, AdaptedScale(), FixedT(100), 5000, seed=9)
        np.testing.assert_array_equal(e1.m, e2.m)
        np.testing.assert_array_equal(e1.v, e2.v)


class TestUniformStability:
    def test_degenerate_range_matches_pointwise_estimate(self):
        # a0 = a1 reduces to the pointwise functional at lambda/2; the log
        # factor in the bound degenerates to one
        noise = gaussian_noise()
        a = 3.0
        uni = mc_uniform_stability(noise, ConstantScale(1.0), FixedT(100),
                                   a0=a, a1=a, lam=0.04, n_rep=5000, seed=10)
        point = mc_stability(noise, ConstantScale(1.0), FixedT(100), a=a,
                             lam=0.02, n_rep=5000, seed=10)
        assert uni.mc_estimate == pytest.approx(point.mc_estimate, rel=1e-14)
        assert uni.bound == pytest.approx(1.0 + c_lambda(noise.mu, noise.gamma, 0.04), rel=1e-14)

    def test_uniform_bound_passes(self):
        noise = gaussian_noise()
        rep = mc_uniform_stability(noise, ConstantScale(1.0), FixedT(100),
                                   a0=1.0, a1=100.0, lam=0.04, n_rep=20_000, seed=11)
        assert rep.passed
        assert rep.bound == pytest.approx(
            (1.0 + c_lambda(noise.mu, noise.gamma, 0.04)) * (1.0 + math.log(100.0)), rel=1e-14)

    def test_zero_martingale_paths_give_one(self):
        noise = gaussian_noise()
        rep = mc_uniform_stability(noise, ConstantScale(0.0), FixedT(20),
                                   a0=1.0, a1=10.0, lam=0.05, n_rep=200, seed=12)
        assert rep.mc_estimate == 1.0

    def test_interior_maximum_formula(self):
        # brute-force grid maximization agrees with the closed-form a* = clip(v)
        rng = np.random.default_rng(13)
        a0, a1 = 0.7, 40.0
        for _ in range(200):
            m = rng.standard_normal() * 3
            v = rng.uniform(0, 80)
            grid = np.linspace(a0, a1, 20_000)
            brute = np.max(grid * m * m / (grid + v) ** 2)
            a_star = np.clip(v, a0, a1)
            closed = a_star * m * m / (a_star + v) ** 2
            assert closed >= brute - 1e-9 * max(1.0, brute)


class TestPiTail:
    def _process(self):
        f = lambda rows: np.zeros(np.atleast_2d(rows).shape[0])
        return iid_regression_spec(f, gaussian_noise(), design=uniform_design(0.0, 1.0), n=60)

    def _cfg(self):
        return GridConfig(x_point=[0.0], h0=1.0, q=0.7, j_max=12)

    def test_t_zero_gives_one(self):
        est, _ = empirical_pi(self._process(), self._cfg(), 0, [0.0], n_rep=200, seed=1)
        assert est[0] == 1.0

    def test_huge_t_gives_zero(self):
        est, _ = empirical_pi(self._process(), self._cfg(), 0, [1e3], n_rep=200, seed=2)
        assert est[0] == 0.0

    def test_monotone_tail(self):
        # strictly decreasing where the statistic has mass; nonincreasing always
        est, _ = empirical_pi(self._process(), self._cfg(), 0, [0.5, 1.0, 2.0],
                              n_rep=2000, seed=3)
        assert est[0] > est[1] > est[2]
        est_big, _ = empirical_pi(self._process(), self._cfg(), 0, [2.0, 4.0, 8.0],
                                  n_rep=500, seed=4)
        assert est_big[0] >= est_big[1] >= est_big[2]

    def test_i0_restriction_reduces_statistic(self):
        spec = self._process()
        cfg = self._cfg()
        for r in range(20):
            sample = lepski.simulate(spec, (55, r))
            assert pi_statistic(sample, cfg, 3) <= pi_statistic(sample, cfg, 0) + 1e-15


class TestLemmas:
    def test_moment_lemma_trivial_equality(self):
        # m = rho = 0: both sides equal one
        assert check_lemma_moment(0.25, math.sqrt(2), 0.0, 0.0)

    def test_moment_lemma_gaussian_closed_form(self):
        assert check_lemma_moment(0.25, math.sqrt(2), 0.1, 0.3)

    def test_moment_lemma_sign_symmetry(self):
        from lepski.stability import lemma_moment_bound

        assert lemma_moment_bound(0.25, 2.0, 0.1, 0.3) == lemma_moment_bound(0.25, 2.0, 0.1, -0.3)

    def test_moment_lemma_monte_carlo_two_point(self):
        noise = two_point_noise(mu=0.5)
        assert check_lemma_moment(noise.mu, noise.gamma, 0.2, 0.4, noise=noise,
                                  n_rep=100_000, seed=5)

    def test_cosh_sup_small_grids(self):
        for a_const in (0.1, 1.0, 10.0):
            assert check_lemma_cosh_sup(a_const, grid_eta=400, grid_z=400)

    def test_cosh_sup_eta_zero_and_z_zero_rows(self):
        # eta = 0 is an equality (0 <= 0); z = 0 reduces to e^x - 1 <= x e^x
        assert check_lemma_cosh_sup(2.0, grid_eta=3, grid_z=3)
