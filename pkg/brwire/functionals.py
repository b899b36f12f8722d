"""Per-realization functionals of the counting measures.

Everything here is a pure function of a simulated trajectory (or of a single
counting measure). Laplace transforms are evaluated in log space whenever an
exponent leaves [-600, 600], so the normalized quantities stay finite even
when the transforms themselves would overflow.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.special import logsumexp

from brwire.env_model import EnvState, state_sigma2
from brwire.errors import LaplaceOverflowError

if TYPE_CHECKING:
    from brwire.simulator import ImmigrationRealization, Trajectory

logger = logging.getLogger(__name__)

LOG_SPACE_THRESHOLD = 600.0
LOG_FLOAT_MAX = float(np.log(np.finfo(float).max))
GRID_TOLERANCE = 1e-9


def _readonly(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class CountingMeasure:
    """Point measure with unit mass at each particle position."""

    positions: np.ndarray

    @classmethod
    def from_positions(cls, positions: Sequence[float] | np.ndarray) -> "CountingMeasure":
        values = np.sort(np.asarray(positions, dtype=float))
        if values.size == 0:
            raise ValueError("A counting measure needs at least one point")
        return cls(positions=_readonly(values))

    @property
    def total(self) -> int:
        return int(self.positions.size)

    @property
    def rightmost(self) -> float:
        return float(self.positions[-1])

    @property
    def leftmost(self) -> float:
        return float(self.positions[0])

    def mass(self, a: float, b: float) -> int:
        """Mass of the closed interval [a, b]; either end may be infinite."""
        if a > b:
            return 0
        lo = np.searchsorted(self.positions, a, side="left")
        hi = np.searchsorted(self.positions, b, side="right")
        return int(hi - lo)

    def laplace(self, t: float) -> float:
        return laplace(self, t)

    def log_laplace(self, t: float) -> float:
        return log_laplace(self.positions, t)


def laplace(measure: CountingMeasure, t: float) -> float:
    """Computes sum_u exp(t S_u) with compensated summation.

    Raises:
        LaplaceOverflowError: If some exp(t S_u) is not representable; use
            :func:`log_laplace` instead.
    """
    exponents = t * measure.positions
    if float(np.max(exponents)) > LOG_FLOAT_MAX:
        raise LaplaceOverflowError(f"exp({float(np.max(exponents))}) overflows; use log_laplace")
    return math.fsum(np.exp(exponents).tolist())


def log_laplace(positions: np.ndarray, t: float) -> float:
    """Computes log sum_u exp(t S_u), switching to log-sum-exp for large exponents.

    Returns:
        The log transform, or -inf for an empty set of positions.
    """
    if positions.size == 0:
        return -math.inf
    exponents = t * positions
    if float(np.max(np.abs(exponents))) > LOG_SPACE_THRESHOLD:
        return float(logsumexp(exponents))
    return float(np.log(np.sum(np.exp(exponents))))


def log_laplace_grid(positions: np.ndarray, t_grid: np.ndarray) -> np.ndarray:
    return np.array([log_laplace(positions, float(t)) for t in t_grid])


def cdf_ratio(measure: CountingMeasure, x: float | np.ndarray) -> float | np.ndarray:
    """Returns Z(-inf, x] / Z(R), right-continuous in x."""
    counts = np.searchsorted(measure.positions, x, side="right")
    ratio = counts / measure.total
    return float(ratio) if np.ndim(ratio) == 0 else ratio


def founder_log_laplace(
    positions: np.ndarray,
    founder_ids: np.ndarray,
    founder_positions: np.ndarray,
    t: float,
) -> np.ndarray:
    """Log Laplace transform of each founder's family, recentred at the founder.

    Particles must be grouped by founder (``founder_ids`` nondecreasing) and
    every founder must have at least one living descendant.

    Returns:
        For each founder j, log sum_{v descends from j} exp(t (S_v - S_j)).
    """
    num_founders = founder_positions.size
    starts = np.searchsorted(founder_ids, np.arange(num_founders), side="left")
    sizes = np.diff(np.append(starts, founder_ids.size))
    if np.any(sizes == 0):
        raise ValueError("Every founder needs at least one descendant")
    exponents = t * (positions - founder_positions[founder_ids])
    group_max = np.maximum.reduceat(exponents, starts)
    sums = np.add.reduceat(np.exp(exponents - np.repeat(group_max, sizes)), starts)
    return group_max + np.log(sums)


def _grid_index(t_grid: np.ndarray, t: float) -> int | None:
    matches = np.flatnonzero(np.abs(t_grid - t) <= GRID_TOLERANCE)
    return int(matches[0]) if matches.size else None


@dataclass(frozen=True)
class QuenchedNormalizers:
    """Conditional means along one environment realization.

    Attributes:
        environment: The states xi_0, ..., xi_{n-1}.
        t_grid: The grid the tables are evaluated on.
        log_m: log m_k(t) for k < n, shape (n, T).
        log_pi: log Pi_k(t) for k <= n, shape (n + 1, T), with Pi_0 = 1.
        sigma2: sigma_k^2 for k < n.
        b: b_k for k <= n, with b_0 = 0.
    """

    environment: tuple[EnvState, ...]
    t_grid: np.ndarray
    log_m: np.ndarray
    log_pi: np.ndarray
    sigma2: np.ndarray
    b: np.ndarray

    @classmethod
    def build(cls, environment: Sequence[EnvState], t_grid: np.ndarray) -> "QuenchedNormalizers":
        environment = tuple(environment)
        t_grid = np.asarray(t_grid, dtype=float)
        n = len(environment)
        log_m = np.array([state.log_m(t_grid) for state in environment]).reshape(n, t_grid.size)
        log_pi = np.zeros((n + 1, t_grid.size))
        for k in range(n):
            log_pi[k + 1] = log_pi[k] + log_m[k]
        sigma2 = np.array([state_sigma2(state) for state in environment])
        b2 = np.zeros(n + 1)
        for k in range(n):
            b2[k + 1] = b2[k] + sigma2[k]
        return cls(
            environment=environment,
            t_grid=_readonly(t_grid.copy()),
            log_m=_readonly(log_m),
            log_pi=_readonly(log_pi),
            sigma2=_readonly(sigma2),
            b=_readonly(np.sqrt(b2)),
        )

    @property
    def n_generations(self) -> int:
        return len(self.environment)

    def log_pi_at(self, t: float) -> np.ndarray:
        """Returns log Pi_k(t) for k = 0, ..., n at an arbitrary t."""
        if (idx := _grid_index(self.t_grid, t)) is not None:
            return self.log_pi[:, idx]
        log_pi = np.zeros(self.n_generations + 1)
        for k, state in enumerate(self.environment):
            log_pi[k + 1] = log_pi[k] + float(state.log_m(t))
        return log_pi


def _log_transforms(trajectory: "Trajectory", t: float) -> tuple[np.ndarray, np.ndarray]:
    """Returns (log Z~_n(t), log Zbar_n(t)) over all generations."""
    if (idx := _grid_index(trajectory.t_grid, t)) is not None:
        total = np.array([s.log_laplace[idx] for s in trajectory.summaries])
        root = np.array([s.log_laplace_root[idx] for s in trajectory.summaries])
        return total, root
    if (idx := _grid_index(trajectory.decomposition_t, t)) is not None:
        total = np.array([s.decomposition_log_laplace[idx] for s in trajectory.summaries])
        root = np.array([s.founder_log_laplace[0, idx] for s in trajectory.summaries])
        return total, root
    raise ValueError(f"t={t} is on neither the t-grid nor the decomposition t-values; add it to the config")


def log_W(trajectory: "Trajectory", t: float, normalizers: QuenchedNormalizers | None = None) -> np.ndarray:
    normalizers = trajectory.normalizers if normalizers is None else normalizers
    total, _ = _log_transforms(trajectory, t)
    return total - normalizers.log_pi_at(t)


def log_W_bar(trajectory: "Trajectory", t: float, normalizers: QuenchedNormalizers | None = None) -> np.ndarray:
    normalizers = trajectory.normalizers if normalizers is None else normalizers
    _, root = _log_transforms(trajectory, t)
    return root - normalizers.log_pi_at(t)


def W(trajectory: "Trajectory", t: float, normalizers: QuenchedNormalizers | None = None) -> np.ndarray:
    """Returns W_n(t) = Z~_n(t) / Pi_n(t) for n = 0, ..., N."""
    return np.exp(log_W(trajectory, t, normalizers))


def W_bar(trajectory: "Trajectory", t: float, normalizers: QuenchedNormalizers | None = None) -> np.ndarray:
    """Returns Wbar_n(t), the same normalization restricted to the root's family."""
    return np.exp(log_W_bar(trajectory, t, normalizers))


def log_Y_k_of_t(immigration: "ImmigrationRealization", k: int, t: float) -> float:
    return log_laplace(immigration.batch(k), t)


def Y_k_of_t(immigration: "ImmigrationRealization", k: int, t: float) -> float:
    """Returns Y_k(t) = sum_{i <= V_k} exp(t S_{0_k i}), zero when no immigrant arrives."""
    return math.exp(log_Y_k_of_t(immigration, k, t))


def submartingale_mean(trajectory: "Trajectory", t: float) -> np.ndarray:
    """Returns E_{xi,Y} W_n(t) = 1 + sum_{k=1}^{n} Pi_k(t)^{-1} Y_{k-1}(t) for n = 0, ..., N."""
    log_pi = trajectory.normalizers.log_pi_at(t)
    n = trajectory.n_generations
    increments = np.array(
        [math.exp(log_Y_k_of_t(trajectory.immigration, k - 1, t) - log_pi[k]) for k in range(1, n + 1)]
    )
    return 1.0 + np.concatenate([[0.0], np.cumsum(increments)])


def decomposition_residuals(trajectory: "Trajectory", t: float) -> np.ndarray:
    """Relative gap between W_n(t) and its founder decomposition, per generation.

    The right-hand side sums, over the root and every immigrant founder j
    that entered at generation k_j, the founder's recentred family
    transform normalized by Pi_n(t) / Pi_{k_j}(t), times Pi_{k_j}(t)^{-1}
    and exp(t S_j).
    """
    if (idx := _grid_index(trajectory.decomposition_t, t)) is None:
        raise ValueError(f"t={t} is not one of the decomposition t-values {list(trajectory.decomposition_t)}")
    log_pi = trajectory.normalizers.log_pi_at(t)
    residuals = np.empty(len(trajectory.summaries))
    for n, summary in enumerate(trajectory.summaries):
        founders = summary.founders
        lhs = summary.decomposition_log_laplace[idx] - log_pi[n]
        entry = log_pi[founders.generation]
        family = summary.founder_log_laplace[:, idx] - (log_pi[n] - entry)
        terms = family - entry + t * founders.position
        rhs = float(logsumexp(terms))
        residuals[n] = abs(math.expm1(rhs - lhs))
    return residuals


def decomposition_residual(trajectory: "Trajectory", t: float) -> float:
    return float(np.max(decomposition_residuals(trajectory, t)))


def rightmost(trajectory: "Trajectory") -> np.ndarray:
    """Returns R_n, the rightmost particle position, for every generation."""
    return np.array([s.rightmost for s in trajectory.summaries])
