"""Tests environment states, models and the standing-assumption checks."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from brwire.env_model import (
    CategoricalOffspring,
    EnvModel,
    EnvState,
    FixedOffspring,
    GaussianLaw,
    ImmigrationLaw,
    PoissonCount,
    TwoPointLaw,
    sample_environment,
    sample_state_indices,
    state_m,
    state_m_prime,
    state_sigma2,
    validate,
)
from brwire.utils.rng import substream


def _constant(offspring: FixedOffspring | CategoricalOffspring, displacement: GaussianLaw | TwoPointLaw) -> EnvModel:
    return EnvModel(kind="constant", states=(EnvState(offspring=offspring, displacement=displacement),))


def test_base_model_passes_validation(base_model: EnvModel) -> None:
    report = validate(base_model)
    assert report.passed
    assert not report.warnings
    assert report.check("supercritical").status == "pass"


def test_state_means() -> None:
    state = EnvState(offspring=FixedOffspring(m=2), displacement=GaussianLaw())
    assert state_m(state, 0.0) == pytest.approx(2.0)
    assert state_m(state, 1.0) == pytest.approx(2.0 * math.exp(0.5))
    assert state_m_prime(state, 1.0) == pytest.approx(2.0 * math.exp(0.5))
    assert state_sigma2(state) == pytest.approx(1.0)


def test_two_point_log_mgf_is_stable() -> None:
    law = TwoPointLaw(offset=1.0)
    assert float(law.log_mgf(0.5)) == pytest.approx(math.log(math.cosh(0.5)))
    assert math.isfinite(float(law.log_mgf(1e4)))
    assert float(law.log_mgf(1e4)) == pytest.approx(1e4 - math.log(2.0))


def test_extinction_is_rejected() -> None:
    model = _constant(CategoricalOffspring(support=(0, 3), probs=(0.2, 0.8)), GaussianLaw())
    report = validate(model)
    assert not report.passed
    assert report.check("no_extinction").message == "P(N=0)=0 violated in states [0]"


def test_fixed_offspring_needs_at_least_two_children() -> None:
    for m in (0, 1):
        with pytest.raises(ValidationError):
            FixedOffspring(m=m)
    state = {"offspring": {"kind": "fixed", "m": 1}, "displacement": {"kind": "gaussian"}}
    with pytest.raises(ValidationError):
        EnvModel.model_validate({"kind": "constant", "states": [state]})


def test_no_branching_is_rejected() -> None:
    report = validate(_constant(CategoricalOffspring(support=(1,), probs=(1.0,)), GaussianLaw()))
    assert report.check("branching").status == "fail"
    assert report.check("supercritical").status == "fail"


def test_uncentered_state_is_a_warning(noncentered_model: EnvModel) -> None:
    report = validate(noncentered_model)
    assert report.passed
    assert [c.name for c in report.warnings] == ["centering[0]"]


def test_uncentered_state_declared_centered_fails() -> None:
    report = validate(_constant(FixedOffspring(m=2), GaussianLaw(mean=0.5)))
    assert report.check("centering[0]").status == "fail"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "constant", "probs": (1.0,)},
        {"kind": "iid", "probs": (0.5, 0.6)},
        {"kind": "iid", "probs": (0.5, 0.5), "transition": ((0.5, 0.5), (0.5, 0.5))},
        {"kind": "markov", "transition": ((0.0, 1.0), (1.0, 0.0))},
        {"kind": "markov", "transition": ((1.0, 0.0), (0.0, 1.0))},
        {"kind": "markov", "transition": ((0.5, 0.5),)},
    ],
)
def test_malformed_models_are_rejected(kwargs: dict) -> None:
    states = (
        EnvState(offspring=FixedOffspring(m=2), displacement=GaussianLaw()),
        EnvState(offspring=FixedOffspring(m=3), displacement=GaussianLaw()),
    )
    if kwargs["kind"] == "constant":
        states = states[:1]
    with pytest.raises(ValidationError):
        EnvModel(states=states, **kwargs)


def test_categorical_offspring_is_checked() -> None:
    with pytest.raises(ValidationError):
        CategoricalOffspring(support=(1, 1), probs=(0.5, 0.5))
    with pytest.raises(ValidationError):
        CategoricalOffspring(support=(), probs=())
    with pytest.raises(ValidationError):
        CategoricalOffspring(support=(1, 2), probs=(1.2, -0.2))
    with pytest.raises(ValidationError):
        EnvState.model_validate({"offspring": {"kind": "fixed", "m": 2}, "displacement": {"kind": "cauchy"}})


def test_markov_stationary_distribution(markov_model: EnvModel) -> None:
    pi = markov_model.stationary
    assert pi == pytest.approx([4 / 7, 3 / 7], abs=1e-12)
    p = np.asarray(markov_model.transition)
    assert np.max(np.abs(pi @ p - pi)) < 1e-12
    assert not pi.flags.writeable


def test_markov_sampling_matches_stationary_frequencies(markov_model: EnvModel) -> None:
    indices = sample_state_indices(markov_model, 20_000, substream(0, "test"))
    assert np.mean(indices == 0) == pytest.approx(4 / 7, abs=0.02)
    transitions = np.sum((indices[:-1] == 0) & (indices[1:] == 1)) / np.sum(indices[:-1] == 0)
    assert transitions == pytest.approx(0.3, abs=0.02)


def test_iid_sampling(two_state_model: EnvModel) -> None:
    indices = sample_state_indices(two_state_model, 10_000, substream(1, "test"))
    assert np.mean(indices) == pytest.approx(0.5, abs=0.03)


def test_environment_sampling_is_reproducible(markov_model: EnvModel) -> None:
    first = sample_environment(markov_model, 50, seed=11)
    second = sample_environment(markov_model, 50, seed=11)
    assert first == second
    assert sample_environment(markov_model, 50, seed=12) != first


def test_without_immigration(immigration_model: EnvModel) -> None:
    assert immigration_model.has_immigration
    stripped = immigration_model.without_immigration()
    assert not stripped.has_immigration
    assert stripped.states[0].offspring == immigration_model.states[0].offspring
    assert isinstance(immigration_model.states[0].immigration.count, PoissonCount)
    assert ImmigrationLaw().is_zero


@pytest.mark.parametrize(
    "state, t, expected",
    [
        (EnvState(offspring=FixedOffspring(m=2), displacement=GaussianLaw()), 1.0, 2.0 * math.exp(0.5)),
        (EnvState(offspring=FixedOffspring(m=3), displacement=TwoPointLaw(offset=1.0)), 1.0, 3.0 * math.cosh(1.0)),
    ],
)
def test_state_m_matches_monte_carlo(state: EnvState, t: float, expected: float) -> None:
    rng = substream(0, "state_m")
    size = 10**6
    samples = state.offspring.sample(rng, size) * np.exp(t * state.displacement.sample(rng, size))
    mean, se = float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(size))
    assert float(state_m(state, t)) == pytest.approx(expected)
    assert abs(mean - expected) <= 3.0 * se
