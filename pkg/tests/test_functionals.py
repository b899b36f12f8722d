"""Tests the per-realization functionals."""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import logsumexp

from brwire.env_model import EnvModel
from brwire.errors import LaplaceOverflowError
from brwire.functionals import (
    CountingMeasure,
    QuenchedNormalizers,
    W,
    W_bar,
    Y_k_of_t,
    cdf_ratio,
    decomposition_residual,
    decomposition_residuals,
    founder_log_laplace,
    laplace,
    log_laplace,
    log_W,
    rightmost,
    submartingale_mean,
)
from brwire.rates import log_corrected_speed, speed
from brwire.simulator import SimConfig, simulate, simulate_replicas


def test_counting_measure() -> None:
    measure = CountingMeasure.from_positions([0.5, -1.0, 2.0, 0.5])
    assert measure.total == 4
    assert measure.rightmost == 2.0
    assert measure.leftmost == -1.0
    assert measure.mass(0.5, 2.0) == 3
    assert measure.mass(-math.inf, 0.0) == 1
    assert measure.mass(3.0, math.inf) == 0
    assert measure.mass(1.0, 0.0) == 0
    assert cdf_ratio(measure, 0.5) == 0.75
    assert cdf_ratio(measure, np.array([-2.0, 0.0, 5.0])) == pytest.approx([0.0, 0.25, 1.0])
    with pytest.raises(ValueError):
        CountingMeasure.from_positions([])


def test_laplace_paths_agree() -> None:
    positions = np.random.default_rng(0).normal(size=1000)
    measure = CountingMeasure.from_positions(positions)
    for t in (-2.0, 0.0, 0.7):
        assert math.log(laplace(measure, t)) == pytest.approx(log_laplace(measure.positions, t), rel=1e-13)
    assert laplace(measure, 0.0) == 1000.0
    big = 800.0 / float(np.max(np.abs(positions)))
    assert log_laplace(measure.positions, big) == pytest.approx(float(logsumexp(big * measure.positions)))
    with pytest.raises(LaplaceOverflowError):
        laplace(CountingMeasure.from_positions([1000.0]), 1.0)
    assert log_laplace(np.zeros(0), 1.0) == -math.inf


def test_founder_log_laplace_recentres_each_family() -> None:
    positions = np.array([0.1, -0.2, 1.0, 1.5, 3.0])
    founder_ids = np.array([0, 0, 1, 1, 2])
    founder_positions = np.array([0.0, 1.0, 3.0])
    values = founder_log_laplace(positions, founder_ids, founder_positions, 2.0)
    expected = [
        math.log(math.exp(0.2) + math.exp(-0.4)),
        math.log(1.0 + math.exp(1.0)),
        0.0,
    ]
    assert values == pytest.approx(expected, abs=1e-14)
    with pytest.raises(ValueError):
        founder_log_laplace(positions, np.array([0, 0, 2, 2, 2]), founder_positions, 1.0)


def test_normalizers_follow_the_product_recurrence(markov_model: EnvModel, small_grid: np.ndarray) -> None:
    sim = SimConfig(n_generations=6, seed=3, t_grid=small_grid)
    trajectory = simulate(markov_model, sim)
    normalizers = trajectory.normalizers
    assert normalizers.log_pi.shape == (7, small_grid.size)
    assert np.all(normalizers.log_pi[0] == 0.0)
    for k, state in enumerate(trajectory.environment):
        assert normalizers.log_pi[k + 1] == pytest.approx(normalizers.log_pi[k] + state.log_m(small_grid))
    assert normalizers.log_pi_at(0.3) == pytest.approx(
        np.concatenate([[0.0], np.cumsum([float(s.log_m(0.3)) for s in trajectory.environment])])
    )
    assert normalizers.b[-1] ** 2 == pytest.approx(float(np.sum(normalizers.sigma2)))


def test_w_starts_at_one_and_equals_w_bar_without_immigration(base_model: EnvModel, small_grid: np.ndarray) -> None:
    trajectory = simulate(base_model, SimConfig(n_generations=8, seed=0, t_grid=small_grid))
    for t in (-1.0, 0.5, 2.0):
        w = W(trajectory, t)
        assert w[0] == 1.0
        assert np.array_equal(w, W_bar(trajectory, t))
    assert W(trajectory, 0.0) == pytest.approx(np.ones(9))
    with pytest.raises(ValueError):
        log_W(trajectory, 0.123)


def test_decomposition_residual_is_tiny(markov_model: EnvModel) -> None:
    trajectory = simulate(markov_model, SimConfig(n_generations=10, seed=5))
    assert len(trajectory.summaries[-1].founders) > 1
    for t in trajectory.decomposition_t:
        residuals = decomposition_residuals(trajectory, float(t))
        assert residuals.shape == (11,)
        assert decomposition_residual(trajectory, float(t)) <= 1e-9
    with pytest.raises(ValueError):
        decomposition_residuals(trajectory, 0.5)


def test_submartingale_mean(immigration_model: EnvModel, small_grid: np.ndarray) -> None:
    sim = SimConfig(n_generations=5, seed=2, t_grid=small_grid, mode="quenched_xi_and_Y")
    trajectory = simulate(immigration_model, sim)
    target = submartingale_mean(trajectory, 1.0)
    assert target[0] == 1.0
    assert np.all(np.diff(target) >= 0.0)
    log_pi = trajectory.normalizers.log_pi_at(1.0)
    expected = 1.0 + sum(
        Y_k_of_t(trajectory.immigration, k - 1, 1.0) * math.exp(-log_pi[k]) for k in range(1, 6)
    )
    assert target[-1] == pytest.approx(expected)


def test_empty_immigrant_batch_has_zero_transform(base_model: EnvModel) -> None:
    trajectory = simulate(base_model, SimConfig(n_generations=3, seed=0))
    assert Y_k_of_t(trajectory.immigration, 0, 1.0) == 0.0


def test_rightmost(base_model: EnvModel) -> None:
    trajectory = simulate(base_model, SimConfig(n_generations=6, seed=1, keep_measures="all"))
    r = rightmost(trajectory)
    assert r[0] == 0.0
    for n in range(7):
        assert r[n] == trajectory.measure(n).rightmost


@pytest.mark.slow
@pytest.mark.timeout(600)
def test_rightmost_speed(base_model: EnvModel) -> None:
    n = 20
    sim = SimConfig(n_generations=n, keep_measures="none", t_grid=np.zeros(1), decomposition_t=())
    ratios = [rightmost(simulate(base_model, replace(sim, seed=seed)))[n] / n for seed in range(5)]
    reference = log_corrected_speed(base_model, n)
    assert reference < speed(base_model)
    assert abs(float(np.median(ratios)) - reference) <= 0.1


@pytest.mark.timeout(300)
def test_w_bar_has_mean_one(base_model: EnvModel) -> None:
    t_grid = np.array([0.0, 1.0])
    sim = SimConfig(n_generations=5, replicas=1000, keep_measures="none", t_grid=t_grid, decomposition_t=())
    values = np.array([W_bar(trajectory, 1.0)[-1] for trajectory in simulate_replicas(base_model, sim)])
    mean, se = float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))
    assert abs(mean - 1.0) <= 3.0 * se


def test_normalizers_build_directly(base_model: EnvModel) -> None:
    normalizers = QuenchedNormalizers.build([base_model.states[0]] * 4, np.array([0.0, 1.0]))
    assert normalizers.log_pi[:, 0] == pytest.approx(np.arange(5) * math.log(2.0))
    assert normalizers.log_pi[:, 1] == pytest.approx(np.arange(5) * (math.log(2.0) + 0.5))
    assert normalizers.b == pytest.approx(np.sqrt(np.arange(5)))
