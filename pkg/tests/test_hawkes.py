"""Point-process core: intensity, likelihood, fitting, simulation.

Oracles are the naive O(n^2) sums, closed forms for tiny n, and
simulate-then-refit recovery; the heavyweight versions of these loops
live in the acceptance suite.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from phenolog.errors import FitError
from phenolog.hawkes import (
    HawkesParams,
    _neg_ll_and_grad,
    _to_unconstrained,
    compensator,
    fit,
    intensity,
    log_likelihood,
    simulate,
    simulate_with_blackouts,
)


def naive_intensity(params, history, t):
    lam = params.gamma
    for ti in history:
        if ti < t:
            lam += params.alpha * params.beta * math.exp(-params.beta * (t - ti))
    return lam


def naive_log_likelihood(params, times, horizon):
    ll = 0.0
    for i in range(len(times)):
        lam = params.gamma + params.alpha * params.beta * np.exp(
            -params.beta * (times[i] - times[:i])
        ).sum()
        ll += math.log(lam)
    ll -= params.gamma * horizon
    ll -= params.alpha * float((1.0 - np.exp(-params.beta * (horizon - times))).sum())
    return ll


class TestParams:
    def test_invariants(self):
        with pytest.raises(ValueError, match="gamma"):
            HawkesParams(0.0, 0.5, 1.0)
        with pytest.raises(ValueError, match="beta"):
            HawkesParams(1.0, 0.5, -1.0)
        with pytest.raises(ValueError, match="nonstationary"):
            HawkesParams(1.0, 1.0, 1.0)
        assert HawkesParams(1.0, 0.0, 1.0).stationary_rate() == 1.0


class TestIntensity:
    def test_empty_history_is_background(self):
        p = HawkesParams(0.7, 0.4, 2.0)
        assert intensity(p, np.array([]), 5.0) == 0.7

    def test_single_event_closed_form(self):
        p = HawkesParams(0.5, 0.3, 2.0)
        t1 = 1.0
        value = intensity(p, np.array([t1]), t1 + 1.0 / p.beta)
        assert value == pytest.approx(p.gamma + p.alpha * p.beta * math.exp(-1.0), rel=1e-12)

    def test_matches_naive_sum(self):
        rng = np.random.default_rng(2)
        times = np.sort(rng.uniform(0, 50, size=100))
        p = HawkesParams(0.8, 0.5, 1.3)
        for t in rng.uniform(0, 60, size=20):
            assert intensity(p, times, float(t)) == pytest.approx(
                naive_intensity(p, times, float(t)), abs=1e-10
            )

    def test_unsorted_history_rejected(self):
        with pytest.raises(ValueError, match="sorted"):
            intensity(HawkesParams(1, 0.1, 1), np.array([2.0, 1.0]), 3.0)


class TestLogLikelihood:
    def test_single_event_closed_form(self):
        p = HawkesParams(0.6, 0.4, 1.5)
        t1, horizon = 2.0, 10.0
        expected = (
            math.log(p.gamma)
            - p.gamma * horizon
            - p.alpha * (1 - math.exp(-p.beta * (horizon - t1)))
        )
        assert log_likelihood(p, np.array([t1]), horizon) == pytest.approx(expected, rel=1e-12)

    def test_alpha_zero_is_poisson(self):
        p = HawkesParams(1.7, 0.0, 1.0)
        times = np.array([0.5, 1.5, 4.0, 7.25])
        expected = len(times) * math.log(p.gamma) - p.gamma * 10.0
        assert log_likelihood(p, times, 10.0) == pytest.approx(expected, rel=1e-12)

    def test_recursion_equals_double_sum(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            n = int(rng.integers(2, 300))
            horizon = float(rng.uniform(5, 400))
            times = np.sort(rng.uniform(0, horizon, size=n))
            p = HawkesParams(
                float(rng.uniform(0.1, 3)), float(rng.uniform(0, 0.9)), float(rng.uniform(0.1, 4))
            )
            assert log_likelihood(p, times, horizon) == pytest.approx(
                naive_log_likelihood(p, times, horizon), abs=1e-8
            )

    def test_bounds_checked(self):
        p = HawkesParams(1, 0.2, 1)
        with pytest.raises(ValueError, match="within"):
            log_likelihood(p, np.array([5.0]), 4.0)
        with pytest.raises(ValueError, match="at least one"):
            log_likelihood(p, np.array([]), 4.0)


class TestGradient:
    def test_analytic_matches_finite_difference(self):
        rng = np.random.default_rng(17)
        times = np.sort(rng.uniform(0, 80, size=150))
        for _ in range(10):
            z = rng.normal(0, 1.2, size=3)
            _, grad = _neg_ll_and_grad(z, times, 80.0)
            fd = np.zeros(3)
            h = 1e-6
            for i in range(3):
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                fd[i] = (
                    _neg_ll_and_grad(zp, times, 80.0)[0] - _neg_ll_and_grad(zm, times, 80.0)[0]
                ) / (2 * h)
            assert np.abs(grad - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())


class TestFit:
    def test_insufficient_events_refused(self):
        with pytest.raises(FitError, match="insufficient events"):
            fit(np.linspace(1, 5, 5), 10.0)

    def test_poisson_data_recovers_near_zero_alpha(self):
        rng = np.random.default_rng(0)
        horizon = 500.0
        times = np.sort(rng.uniform(0, horizon, size=rng.poisson(2.0 * horizon)))
        result = fit(times, horizon)
        assert result.params.alpha < 0.05
        assert result.params.gamma == pytest.approx(2.0, rel=0.1)

    def test_recovery_short_loop(self):
        true = HawkesParams(0.5, 0.6, 1.2)
        errs = []
        for seed in range(3):
            times = simulate(true, 2000.0, seed=seed)
            fitted = fit(times, 2000.0).params
            errs.append(np.abs(fitted.as_array() - true.as_array()) / true.as_array())
        assert np.median(np.array(errs), axis=0).max() < 0.15

    def test_fitted_ll_beats_every_start(self):
        true = HawkesParams(0.8, 0.4, 1.0)
        times = simulate(true, 300.0, seed=4)
        result = fit(times, 300.0)
        n = times.size
        starts = [
            HawkesParams(gamma=n / 300.0, alpha=a, beta=b)
            for a in (0.1, 0.5)
            for b in (1.0, 1.0 / 24.0)
        ]
        for start in starts:
            assert result.log_likelihood >= log_likelihood(start, times, 300.0) - 1e-9

    def test_report_shape(self):
        times = simulate(HawkesParams(1.0, 0.3, 1.5), 200.0, seed=9)
        result = fit(times, 200.0)
        blob = result.to_json()
        assert set(blob) == {
            "gamma", "alpha", "beta", "log_likelihood", "converged", "n_events", "T_hours",
        }
        assert blob["n_events"] == times.size


class TestSimulate:
    def test_same_seed_identical(self):
        p = HawkesParams(1.0, 0.5, 1.0)
        a = simulate(p, 500.0, seed=42)
        b = simulate(p, 500.0, seed=42)
        assert np.array_equal(a, b)

    def test_poisson_interarrivals_ks(self):
        p = HawkesParams(1.5, 0.0, 1.0)
        passes = 0
        for seed in range(20):
            times = simulate(p, 400.0, seed=seed)
            gaps = np.diff(np.concatenate([[0.0], times]))
            if stats.kstest(gaps, "expon", args=(0, 1 / p.gamma)).pvalue > 0.01:
                passes += 1
        assert passes >= 18

    def test_branching_ratio_count(self):
        p = HawkesParams(1.0, 0.5, 1.0)
        horizon = 10_000.0
        counts = [simulate(p, horizon, seed=s).size for s in range(10)]
        expected = p.gamma * horizon / (1 - p.alpha)
        assert np.mean(counts) == pytest.approx(expected, rel=0.05)

    def test_time_rescaling_to_unit_exponential(self):
        p = HawkesParams(0.7, 0.5, 1.4)
        times = simulate(p, 2000.0, seed=6)
        transformed = np.array([compensator(p, times, t) for t in times])
        gaps = np.diff(np.concatenate([[0.0], transformed]))
        assert stats.kstest(gaps, "expon").pvalue > 0.01

    def test_blackout_suppresses_and_relaxes(self):
        p = HawkesParams(0.6, 0.6, 1.2)
        gate = lambda t: (t % 24.0) >= 23.0 or (t % 24.0) < 7.0
        times = simulate_with_blackouts(p, 30 * 24.0, seed=3, blackout=gate)
        hours = times % 24.0
        assert not np.any((hours >= 23.0) | (hours < 7.0))


class TestUnconstrainedMapping:
    def test_round_trip(self):
        p = HawkesParams(0.37, 0.62, 2.4)
        z = _to_unconstrained(p)
        assert math.exp(z[0]) == pytest.approx(p.gamma, rel=1e-12)
        assert 1 / (1 + math.exp(-z[1])) == pytest.approx(p.alpha, rel=1e-12)
        assert math.exp(z[2]) == pytest.approx(p.beta, rel=1e-12)
