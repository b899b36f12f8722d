"""Defines environment states and stationary environment sequences.

An environment state bundles the three laws that drive one generation of the
process: how many children a particle has, how far each child moves from its
parent, and how many immigrants join (and where). Displacements are i.i.d.
and independent of the number of children, so every moment functional used
by the rate layer has a closed form.
"""

import functools
import logging
from typing import Annotated, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from brwire.errors import ModelSchemaError
from brwire.utils.rng import substream

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-9
STATIONARY_TOLERANCE = 1e-12
CENTERING_TOLERANCE = 1e-12


def _check_simplex(probs: Sequence[float], what: str) -> None:
    if len(probs) == 0:
        raise ModelSchemaError(f"{what} must not be empty")
    if any(p < 0 for p in probs):
        raise ModelSchemaError(f"{what} has negative entries: {list(probs)}")
    if abs(sum(probs) - 1.0) > SIMPLEX_TOLERANCE:
        raise ModelSchemaError(f"{what} does not sum to one: {list(probs)}")


class _Law(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class GaussianLaw(_Law):
    kind: Literal["gaussian"] = "gaussian"
    mean: float = 0.0
    std: float = Field(default=1.0, gt=0.0)

    @property
    def mean_value(self) -> float:
        return self.mean

    @property
    def second_moment(self) -> float:
        return self.std**2 + self.mean**2

    def log_mgf(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.mean * t + 0.5 * self.std**2 * t**2

    def log_mgf_prime(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.mean + self.std**2 * t

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, self.std, size)


class TwoPointLaw(_Law):
    """Symmetric law putting mass 1/2 on each of -offset and +offset."""

    kind: Literal["two_point"] = "two_point"
    offset: float = Field(gt=0.0)

    @property
    def mean_value(self) -> float:
        return 0.0

    @property
    def second_moment(self) -> float:
        return self.offset**2

    def log_mgf(self, t: np.ndarray | float) -> np.ndarray:
        x = np.abs(np.asarray(t, dtype=float) * self.offset)
        # log cosh(x) without overflow for large |x|.
        return x + np.log1p(np.exp(-2.0 * x)) - np.log(2.0)

    def log_mgf_prime(self, t: np.ndarray | float) -> np.ndarray:
        return self.offset * np.tanh(np.asarray(t, dtype=float) * self.offset)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.where(rng.random(size) < 0.5, -self.offset, self.offset)


DisplacementLaw = Annotated[GaussianLaw | TwoPointLaw, Field(discriminator="kind")]


class FixedOffspring(_Law):
    kind: Literal["fixed"] = "fixed"
    m: int = Field(ge=2)

    @property
    def mean(self) -> float:
        return float(self.m)

    def prob(self, k: int) -> float:
        return 1.0 if k == self.m else 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.m, dtype=np.int64)


class CategoricalOffspring(_Law):
    kind: Literal["categorical"] = "categorical"
    support: tuple[int, ...]
    probs: tuple[float, ...]

    @model_validator(mode="after")
    def _check_law(self) -> "CategoricalOffspring":
        if len(self.support) == 0:
            raise ModelSchemaError("Offspring support must not be empty")
        if any(k < 0 for k in self.support):
            raise ModelSchemaError(f"Offspring support must be non-negative: {list(self.support)}")
        if len(set(self.support)) != len(self.support):
            raise ModelSchemaError(f"Offspring support has duplicates: {list(self.support)}")
        if len(self.probs) != len(self.support):
            raise ModelSchemaError("Offspring support and probabilities differ in length")
        _check_simplex(self.probs, "Offspring probabilities")
        return self

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def prob(self, k: int) -> float:
        return sum(p for s, p in zip(self.support, self.probs) if s == k)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(np.asarray(self.support, dtype=np.int64), size=size, p=np.asarray(self.probs))


OffspringLaw = Annotated[FixedOffspring | CategoricalOffspring, Field(discriminator="kind")]


class ZeroCount(_Law):
    kind: Literal["zero"] = "zero"

    def sample(self, rng: np.random.Generator) -> int:
        return 0


class FixedCount(_Law):
    kind: Literal["fixed"] = "fixed"
    v: int = Field(ge=0)

    def sample(self, rng: np.random.Generator) -> int:
        return self.v


class PoissonCount(_Law):
    kind: Literal["poisson"] = "poisson"
    rate: float = Field(ge=0.0)

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.poisson(self.rate))


CountLaw = Annotated[ZeroCount | FixedCount | PoissonCount, Field(discriminator="kind")]


class ImmigrationLaw(_Law):
    """Number of immigrants per generation and the law of their (absolute) positions."""

    count: CountLaw = ZeroCount()
    position: DisplacementLaw = GaussianLaw()

    @property
    def is_zero(self) -> bool:
        return isinstance(self.count, ZeroCount)


class EnvState(_Law):
    offspring: OffspringLaw
    displacement: DisplacementLaw
    immigration: ImmigrationLaw = ImmigrationLaw()
    centered: bool = True

    def log_m(self, t: np.ndarray | float) -> np.ndarray:
        """Log of the conditional mean m(t) = E[N] * E[exp(t L)]."""
        return np.log(self.offspring.mean) + self.displacement.log_mgf(t)

    def without_immigration(self) -> "EnvState":
        return self.model_copy(update={"immigration": ImmigrationLaw(position=self.immigration.position)})


def state_m(state: EnvState, t: np.ndarray | float) -> np.ndarray:
    return np.exp(state.log_m(t))


def state_m_prime(state: EnvState, t: np.ndarray | float) -> np.ndarray:
    return state_m(state, t) * state.displacement.log_mgf_prime(t)


def state_log_m_prime(state: EnvState, t: np.ndarray | float) -> np.ndarray:
    """Returns m'(t) / m(t), the derivative of log m."""
    return state.displacement.log_mgf_prime(t)


def state_sigma2(state: EnvState) -> float:
    """Returns (1 / m) E sum_i L_i^2, which equals E[L^2] for independent displacements."""
    return state.displacement.second_moment


def _is_primitive(transition: np.ndarray) -> bool:
    """Checks that a stochastic matrix is irreducible and aperiodic.

    A non-negative k-by-k matrix is primitive iff its ((k - 1)^2 + 1)-th
    power is strictly positive.
    """
    k = transition.shape[0]
    pattern = (transition > 0).astype(np.int64)
    power = np.eye(k, dtype=np.int64)
    for _ in range((k - 1) ** 2 + 1):
        power = np.minimum(power @ pattern, 1)
    return bool(np.all(power > 0))


class EnvModel(_Law):
    kind: Literal["constant", "iid", "markov"]
    states: tuple[EnvState, ...] = Field(min_length=1)
    probs: tuple[float, ...] | None = None
    transition: tuple[tuple[float, ...], ...] | None = None

    @model_validator(mode="after")
    def _check_structure(self) -> "EnvModel":
        k = len(self.states)
        match self.kind:
            case "constant":
                if k != 1 or self.probs is not None or self.transition is not None:
                    raise ModelSchemaError("A constant environment takes exactly one state and no probabilities")
            case "iid":
                if self.probs is None or len(self.probs) != k:
                    raise ModelSchemaError(f"An i.i.d. environment needs {k} state probabilities")
                if self.transition is not None:
                    raise ModelSchemaError("An i.i.d. environment takes no transition matrix")
                _check_simplex(self.probs, "State probabilities")
            case "markov":
                if self.transition is None or len(self.transition) != k:
                    raise ModelSchemaError(f"A Markov environment needs a {k}x{k} transition matrix")
                if self.probs is not None:
                    raise ModelSchemaError("A Markov environment takes no state probabilities")
                for i, row in enumerate(self.transition):
                    if len(row) != k:
                        raise ModelSchemaError(f"Transition row {i} has {len(row)} entries, expected {k}")
                    _check_simplex(row, f"Transition row {i}")
                if not _is_primitive(np.asarray(self.transition)):
                    raise ModelSchemaError("Transition matrix is not irreducible and aperiodic")
        return self

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def stationary(self) -> np.ndarray:
        return _stationary(self)

    @property
    def is_centered(self) -> bool:
        return all(s.centered for s in self.states)

    @property
    def has_immigration(self) -> bool:
        return not all(s.immigration.is_zero for s in self.states)

    def without_immigration(self) -> "EnvModel":
        return self.model_copy(update={"states": tuple(s.without_immigration() for s in self.states)})


@functools.lru_cache(maxsize=64)
def _stationary(model: EnvModel) -> np.ndarray:
    match model.kind:
        case "constant":
            pi = np.ones(1)
        case "iid":
            assert model.probs is not None
            pi = np.asarray(model.probs, dtype=float)
        case "markov":
            assert model.transition is not None
            p = np.asarray(model.transition, dtype=float)
            k = p.shape[0]
            a = np.vstack([p.T - np.eye(k), np.ones((1, k))])
            b = np.concatenate([np.zeros(k), [1.0]])
            pi, *_ = np.linalg.lstsq(a, b, rcond=None)
            pi = np.clip(pi, 0.0, None)
            pi = pi / pi.sum()
            if np.max(np.abs(pi @ p - pi)) > STATIONARY_TOLERANCE:
                raise ModelSchemaError("Could not solve for the stationary distribution")
    pi.setflags(write=False)
    return pi


class ValidationCheck(BaseModel):
    name: str
    status: Literal["pass", "fail", "warn"]
    message: str = ""


class ValidationReport(BaseModel):
    checks: list[ValidationCheck]

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    @property
    def failures(self) -> list[ValidationCheck]:
        return [c for c in self.checks if c.status == "fail"]

    @property
    def warnings(self) -> list[ValidationCheck]:
        return [c for c in self.checks if c.status == "warn"]

    def check(self, name: str) -> ValidationCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate(model: EnvModel, t_grid: np.ndarray | None = None) -> ValidationReport:
    """Checks the standing assumptions on an environment model.

    Args:
        model: The environment model to check.
        t_grid: The grid on which the conditional means must be finite.
            Defaults to 81 points on [-4, 4].

    Returns:
        One check per assumption; non-centered states produce a warning in
        place of the centering check.
    """
    if t_grid is None:
        t_grid = np.linspace(-4.0, 4.0, 81)
    checks: list[ValidationCheck] = []

    dead = [i for i, s in enumerate(model.states) if s.offspring.prob(0) > 0]
    checks.append(
        ValidationCheck(name="no_extinction", status="pass")
        if not dead
        else ValidationCheck(name="no_extinction", status="fail", message=f"P(N=0)=0 violated in states {dead}")
    )

    single = [i for i, s in enumerate(model.states) if s.offspring.prob(1) >= 1.0]
    checks.append(
        ValidationCheck(name="branching", status="pass")
        if not single
        else ValidationCheck(name="branching", status="fail", message=f"P(N=1)<1 violated in states {single}")
    )

    for i, s in enumerate(model.states):
        mean = s.displacement.mean_value
        if not s.centered:
            checks.append(
                ValidationCheck(
                    name=f"centering[{i}]",
                    status="warn",
                    message=f"State {i} is not centered (mean displacement {mean}); centering check skipped",
                )
            )
        elif abs(mean) > CENTERING_TOLERANCE:
            checks.append(
                ValidationCheck(
                    name=f"centering[{i}]",
                    status="fail",
                    message=f"Centering violated in state {i}: mean displacement {mean}",
                )
            )
        else:
            checks.append(ValidationCheck(name=f"centering[{i}]", status="pass"))

    means = np.array([s.offspring.mean for s in model.states])
    with np.errstate(divide="ignore"):
        log_growth = float(np.dot(model.stationary, np.log(means)))
    checks.append(
        ValidationCheck(name="supercritical", status="pass", message=f"E log m_0 = {log_growth}")
        if log_growth > 0
        else ValidationCheck(name="supercritical", status="fail", message=f"E log m_0 = {log_growth} is not positive")
    )

    with np.errstate(divide="ignore", over="ignore"):
        finite = all(bool(np.all(np.isfinite(s.log_m(t_grid)))) for s in model.states)
    checks.append(
        ValidationCheck(name="finite_mean", status="pass")
        if finite
        else ValidationCheck(name="finite_mean", status="fail", message="m(t) is not finite on the t-grid")
    )

    report = ValidationReport(checks=checks)
    for warning in report.warnings:
        logger.warning("%s", warning.message)
    return report


def sample_state_indices(model: EnvModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draws the indices of n consecutive environment states.

    Markov chains start from the stationary distribution, so the returned
    sequence is stationary.
    """
    if n < 1:
        raise ValueError(f"Environment length must be at least 1, got {n}")
    k = model.num_states
    match model.kind:
        case "constant":
            return np.zeros(n, dtype=np.int64)
        case "iid":
            return rng.choice(k, size=n, p=model.stationary)
        case "markov":
            assert model.transition is not None
            cumulative = np.cumsum(np.asarray(model.transition), axis=1)
            uniforms = rng.random(n)
            indices = np.empty(n, dtype=np.int64)
            state = int(np.searchsorted(np.cumsum(model.stationary), uniforms[0], side="right"))
            indices[0] = min(state, k - 1)
            for i in range(1, n):
                state = int(np.searchsorted(cumulative[indices[i - 1]], uniforms[i], side="right"))
                indices[i] = min(state, k - 1)
            return indices
    raise AssertionError(model.kind)


def sample_environment(model: EnvModel, n: int, seed: int) -> list[EnvState]:
    indices = sample_state_indices(model, n, substream(seed, "environment"))
    return [model.states[i] for i in indices]
