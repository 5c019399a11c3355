"""Gaussian Process identities against hand-solved linear algebra."""

from __future__ import annotations

import math

import numpy as np
import pytest

from phenolog.models.gp import (
    GPConfig,
    gp_posterior_predict,
    kernel,
    log_marginal_likelihood,
    median_heuristic,
    select_gp_config,
)


class TestKernel:
    def test_unit_diagonal(self):
        x = np.random.default_rng(0).normal(size=(5, 3))
        k = kernel(x, x, length_scale=2.0)
        assert np.allclose(np.diag(k), 1.0)

    def test_divides_by_two_ell(self):
        a = np.array([[0.0]])
        b = np.array([[2.0]])
        # squared distance 4, ell acting as a squared length scale
        assert kernel(a, b, length_scale=2.0)[0, 0] == pytest.approx(math.exp(-1.0))

    def test_median_heuristic(self):
        x = np.array([[0.0], [1.0], [3.0]])
        # pairwise squared distances: 1, 9, 4 -> median 4
        assert median_heuristic(x) == 4.0
        assert median_heuristic(np.array([[1.0]])) == 1.0


class TestPriorRecovery:
    def test_no_training_points(self):
        config = GPConfig(length_scale=1.5, noise_std=0.7, n_traces=60)
        test_x = np.random.default_rng(1).normal(size=(4, 18))
        y1 = np.array([3.0, 11.0, 7.0, 0.0])
        post = gp_posterior_predict(
            np.empty((0, 18)), np.empty(0), np.empty(0), test_x, y1, config, seed=0
        )
        assert np.array_equal(post.mean, y1)
        # kernel diagonal 1 combined with the noise level
        assert np.allclose(post.std, math.sqrt(1.0 + 0.7**2), atol=1e-6)
        assert post.traces.shape == (60, 4)


class TestInterpolation:
    def test_noise_free_duplicate_point(self):
        rng = np.random.default_rng(2)
        train_x = rng.normal(size=(6, 18))
        y1 = rng.uniform(0, 21, size=6)
        y2 = y1 + rng.normal(0, 2, size=6)
        config = GPConfig(length_scale=3.0, noise_std=0.0)
        post = gp_posterior_predict(
            train_x, y1, y2, train_x[2:3], np.array([y1[2]]), config, seed=0
        )
        assert post.mean[0] == pytest.approx(y2[2], abs=1e-6)


class TestHandSolvedTwoPoint:
    def test_two_by_two_inverse(self):
        # Two training subjects, one test subject; solved with the
        # explicit 2x2 inverse.
        ell, sigma = 2.0, 0.5
        x_train = np.array([[0.0, 0.0], [1.0, 0.0]])
        x_test = np.array([[0.5, 0.5]])
        y1_train = np.array([5.0, 9.0])
        y2_train = np.array([7.0, 8.0])
        y1_test = np.array([6.0])

        k01 = math.exp(-1.0 / (2 * ell))
        ks0 = math.exp(-0.5 / (2 * ell))
        ks1 = math.exp(-0.5 / (2 * ell))
        gram = np.array([[1 + sigma**2, k01], [k01, 1 + sigma**2]])
        det = gram[0, 0] * gram[1, 1] - gram[0, 1] * gram[1, 0]
        inv = np.array([[gram[1, 1], -gram[0, 1]], [-gram[1, 0], gram[0, 0]]]) / det
        resid = y2_train - y1_train
        k_star = np.array([ks0, ks1])
        expected_mean = y1_test[0] + k_star @ inv @ resid
        expected_var = 1.0 - k_star @ inv @ k_star

        config = GPConfig(length_scale=ell, noise_std=sigma, jitter=1e-12)
        post = gp_posterior_predict(
            x_train, y1_train, y2_train, x_test, y1_test, config, seed=0
        )
        assert post.mean[0] == pytest.approx(expected_mean, abs=1e-10)
        assert post.std[0] ** 2 == pytest.approx(expected_var + sigma**2 + 1e-12, abs=1e-9)


class TestPosteriorContraction:
    def test_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(3)
        train_x = rng.normal(size=(25, 18))
        y1 = rng.uniform(0, 21, size=25)
        y2 = y1 + rng.normal(0, 1.5, size=25)
        test_x = rng.normal(size=(40, 18))
        config = GPConfig(noise_std=1.0)
        post = gp_posterior_predict(
            train_x, y1, y2, test_x, rng.uniform(0, 21, size=40), config, seed=1
        )
        prior_var = 1.0 + config.jitter
        assert np.all(post.std**2 - config.noise_std**2 <= prior_var + 1e-9)


class TestTranslationEquivariance:
    def test_constant_shift_passes_through(self):
        rng = np.random.default_rng(4)
        train_x = rng.normal(size=(15, 18))
        y1 = rng.uniform(5, 15, size=15)
        y2 = y1 + rng.normal(0, 1, size=15)
        test_x = rng.normal(size=(6, 18))
        y1_test = rng.uniform(5, 15, size=6)
        config = GPConfig(length_scale=4.0, noise_std=1.0)
        base = gp_posterior_predict(train_x, y1, y2, test_x, y1_test, config, seed=2)
        c = 3.7
        shifted = gp_posterior_predict(
            train_x, y1 + c, y2 + c, test_x, y1_test + c, config, seed=2
        )
        assert np.allclose(shifted.mean - c, base.mean, atol=1e-10)
        assert np.allclose(shifted.traces - c, base.traces, atol=1e-10)


class TestTraces:
    def test_seeded_determinism_and_shape(self):
        rng = np.random.default_rng(5)
        train_x = rng.normal(size=(10, 18))
        y1 = rng.uniform(0, 21, size=10)
        y2 = y1 + rng.normal(size=10)
        test_x = rng.normal(size=(7, 18))
        y1_test = rng.uniform(0, 21, size=7)
        config = GPConfig(n_traces=100)
        a = gp_posterior_predict(train_x, y1, y2, test_x, y1_test, config, seed=9)
        b = gp_posterior_predict(train_x, y1, y2, test_x, y1_test, config, seed=9)
        assert np.array_equal(a.traces, b.traces)
        assert a.traces.shape == (100, 7)
        assert np.array_equal(a.point_prediction, a.traces.mean(axis=0))

    def test_trace_spread_matches_posterior_std(self):
        rng = np.random.default_rng(6)
        train_x = rng.normal(size=(12, 18))
        y1 = rng.uniform(0, 21, size=12)
        y2 = y1 + rng.normal(size=12)
        test_x = rng.normal(size=(5, 18))
        config = GPConfig(n_traces=4000, noise_std=1.0)
        post = gp_posterior_predict(train_x, y1, y2, test_x, np.zeros(5), config, seed=3)
        latent_std = np.sqrt(np.clip(post.std**2 - 1.0, 0, None))
        empirical = post.traces.std(axis=0)
        assert np.allclose(empirical, latent_std, rtol=0.1, atol=0.02)


class TestEvidence:
    def test_grid_search_prefers_true_noise_scale(self):
        rng = np.random.default_rng(7)
        train_x = rng.normal(size=(40, 18))
        y1 = np.full(40, 10.0)
        y2 = y1 + rng.normal(0, 2.0, size=40)  # pure noise at sigma=2
        base = GPConfig()
        chosen = select_gp_config(train_x, y1, y2, base)
        assert chosen.noise_std == 2.0

    def test_lml_finite(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(10, 18))
        y1 = rng.uniform(0, 21, size=10)
        y2 = y1 + rng.normal(size=10)
        assert np.isfinite(log_marginal_likelihood(x, y1, y2, 2.0, 1.0))


class TestConfigValidation:
    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            GPConfig(length_scale=0.0)
        with pytest.raises(ValueError):
            GPConfig(noise_std=-1.0)
        with pytest.raises(ValueError):
            GPConfig(n_traces=0)
