"""Analytic layer: the environment-averaged log mean and the rate functions built on it.

All quantities are exact finite sums over the stationary law of the
environment states. Roots are found by bisection with bracket expansion up to
``T_CAP``; a root that is not bracketed by then is reported as an infinite
sentinel.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import optimize

from brwire.env_model import EnvModel, sample_state_indices, state_log_m_prime, state_sigma2
from brwire.errors import UnclassifiedCaseError
from brwire.utils.rng import substream

logger = logging.getLogger(__name__)

T_CAP = 1e6
ROOT_XTOL = 1e-10
LEGENDRE_WINDOW_POINTS = 2001

Case = Literal["I", "II", "III"]


def lambda_(model: EnvModel, t: np.ndarray | float) -> np.ndarray:
    """Returns Lambda(t) = sum_i pi_i log m_i(t)."""
    t = np.asarray(t, dtype=float)
    return sum(p * state.log_m(t) for p, state in zip(model.stationary, model.states))


def lambda_prime(model: EnvModel, t: np.ndarray | float) -> np.ndarray:
    """Returns Lambda'(t) = sum_i pi_i m_i'(t) / m_i(t)."""
    t = np.asarray(t, dtype=float)
    return sum(p * state_log_m_prime(state, t) for p, state in zip(model.stationary, model.states))


def lambda_monte_carlo(model: EnvModel, t: float, n_samples: int, seed: int) -> float:
    """Estimates Lambda(t) by averaging log m_xi(t) over sampled states."""
    indices = sample_state_indices(model, n_samples, substream(seed, "lambda_monte_carlo"))
    log_m = np.array([float(state.log_m(t)) for state in model.states])
    return float(np.mean(log_m[indices]))


def sigma2(model: EnvModel) -> float:
    """Returns E sigma_0^2, the averaged second moment of the displacements."""
    return float(sum(p * state_sigma2(state) for p, state in zip(model.stationary, model.states)))


def _expanding_root(f: Callable[[float], float], start: float, direction: float) -> float:
    """Finds the first sign change of f moving away from ``start``.

    ``f(start)`` must be negative. The step doubles until f becomes
    non-negative or the distance reaches ``T_CAP``.

    Returns:
        The root, or an infinite sentinel in ``direction`` if f stays negative.
    """
    width = 1.0
    inner = start
    while width <= T_CAP:
        outer = start + direction * width
        if f(outer) >= 0.0:
            lo, hi = sorted((inner, outer))
            return float(optimize.bisect(f, lo, hi, xtol=ROOT_XTOL))
        inner = outer
        width *= 2.0
    return math.copysign(math.inf, direction)


def critical_points(model: EnvModel) -> tuple[float, float]:
    """Returns (t_-, t_+), the roots of g(t) = t Lambda'(t) - Lambda(t).

    g(0) = -Lambda(0) < 0 for supercritical models and g decreases then
    increases, so there is at most one root on each side of zero.
    """
    lambda0 = float(lambda_(model, 0.0))
    if lambda0 <= 0:
        raise ValueError(f"Critical points need a supercritical model, got Lambda(0) = {lambda0}")

    def g(t: float) -> float:
        return t * float(lambda_prime(model, t)) - float(lambda_(model, t))

    t_minus = _expanding_root(g, 0.0, -1.0)
    t_plus = _expanding_root(g, 0.0, 1.0)
    logger.debug("Critical points t_- = %s, t_+ = %s", t_minus, t_plus)
    return t_minus, t_plus


def _edge_slope(model: EnvModel, t_edge: float) -> float:
    """Slope of the free energy beyond a critical point (or of Lambda at infinity)."""
    if math.isinf(t_edge):
        return float(lambda_prime(model, math.copysign(T_CAP, t_edge)))
    return float(lambda_prime(model, t_edge))


def free_energy(
    model: EnvModel,
    t: np.ndarray | float,
    critical: tuple[float, float] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (Lambda_bar(t), Lambda_tilde(t)).

    Lambda_bar equals Lambda between the critical points and continues
    linearly through the origin with slope Lambda'(t_-) or Lambda'(t_+)
    outside; Lambda_tilde = max(Lambda_bar, 0).
    """
    t_minus, t_plus = critical_points(model) if critical is None else critical
    t = np.asarray(t, dtype=float)
    bar = np.asarray(lambda_(model, t), dtype=float)
    if math.isfinite(t_plus):
        bar = np.where(t >= t_plus, t * float(lambda_prime(model, t_plus)), bar)
    if math.isfinite(t_minus):
        bar = np.where(t <= t_minus, t * float(lambda_prime(model, t_minus)), bar)
    return bar, np.maximum(bar, 0.0)


@dataclass(frozen=True)
class CaseClassification:
    t1: float
    t2: float
    case: Case
    exposed: tuple[float, float] | None


def _lambda_minimizer(model: EnvModel) -> float:
    def slope(t: float) -> float:
        return float(lambda_prime(model, t))

    if slope(0.0) == 0.0:
        return 0.0
    direction = -1.0 if slope(0.0) > 0 else 1.0
    root = _expanding_root(lambda t: direction * slope(t), 0.0, direction)
    return root if math.isfinite(root) else math.copysign(T_CAP, direction)


def classify_case(model: EnvModel, critical: tuple[float, float] | None = None) -> CaseClassification:
    """Locates where Lambda is negative and classifies the large-deviation regime.

    Raises:
        UnclassifiedCaseError: If t_1, t_2, t_- and t_+ match none of the
            three orderings.
    """
    t_minus, t_plus = critical_points(model) if critical is None else critical

    def lam(t: float) -> float:
        return float(lambda_(model, t))

    def slope(t: float) -> float:
        return float(lambda_prime(model, t))

    t_min = _lambda_minimizer(model)
    if lam(t_min) >= 0.0:
        return CaseClassification(t1=-math.inf, t2=math.inf, case="I", exposed=None)

    t1 = _expanding_root(lam, t_min, -1.0)
    t2 = _expanding_root(lam, t_min, 1.0)
    if t1 < t_minus < t2 < 0.0:
        return CaseClassification(t1=t1, t2=t2, case="II", exposed=(slope(t2), slope(t_plus)))
    if 0.0 < t1 < t_plus < t2:
        return CaseClassification(t1=t1, t2=t2, case="III", exposed=(slope(t_minus), slope(t1)))
    raise UnclassifiedCaseError(t1, t2, t_minus, t_plus)


def _slope_limits(model: EnvModel, critical: tuple[float, float]) -> tuple[float, float]:
    """Asymptotic slopes of Lambda_tilde at -inf and +inf."""
    t_minus, t_plus = critical
    return min(_edge_slope(model, t_minus), 0.0), max(_edge_slope(model, t_plus), 0.0)


def _search_window(model: EnvModel, x: float, critical: tuple[float, float]) -> tuple[float, float]:
    """Interval holding a maximizer of x t - Lambda_tilde(t).

    Beyond the critical points Lambda_tilde is linear (or zero) and the
    objective is monotone towards them, so the maximizer never lies outside.
    """
    t_minus, t_plus = critical
    lo = t_minus if math.isfinite(t_minus) else -_slope_reach(model, x, -1.0)
    hi = t_plus if math.isfinite(t_plus) else _slope_reach(model, x, 1.0)
    return lo - 1.0, hi + 1.0


def _slope_reach(model: EnvModel, x: float, direction: float) -> float:
    """Distance from zero at which Lambda' passes x, capped at ``T_CAP``."""
    width = 1.0
    while width < T_CAP:
        if direction * (float(lambda_prime(model, direction * width)) - x) >= 0.0:
            return width
        width *= 2.0
    return T_CAP


def legendre(
    model: EnvModel,
    x: float,
    critical: tuple[float, float] | None = None,
) -> float:
    """Returns Lambda_tilde^*(x) = sup_t {x t - Lambda_tilde(t)}.

    The supremum is unbounded (``inf``) when x lies outside the range of
    slopes of Lambda_tilde. Otherwise the concave objective is maximized on
    a grid and the best grid point is refined by golden-section search.
    """
    critical = critical_points(model) if critical is None else critical
    s_left, s_right = _slope_limits(model, critical)
    if x > s_right + ROOT_XTOL or x < s_left - ROOT_XTOL:
        return math.inf

    def neg_objective(t: float) -> float:
        _, tilde = free_energy(model, t, critical)
        return float(tilde) - x * t

    lo, hi = _search_window(model, x, critical)
    grid = np.linspace(lo, hi, LEGENDRE_WINDOW_POINTS)
    _, tilde = free_energy(model, grid, critical)
    values = tilde - x * grid
    i = int(np.argmin(values))
    best = float(values[i])
    if 0 < i < grid.size - 1 and values[i - 1] > values[i] < values[i + 1]:
        result = optimize.minimize_scalar(
            neg_objective,
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            options={"xtol": 1e-12},
        )
    else:
        result = optimize.minimize_scalar(
            neg_objective,
            bounds=(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]),
            method="bounded",
            options={"xatol": 1e-12},
        )
    best = min(best, float(result.fun))
    return -best


def interval_infimum(
    model: EnvModel,
    a: float,
    b: float,
    open_interval: bool,
    critical: tuple[float, float] | None = None,
) -> float:
    """Returns inf Lambda_tilde^* over [a, b], or over (a, b) if ``open_interval``.

    Lambda_tilde^* is convex and finite exactly on the slope range of
    Lambda_tilde, so the infimum is taken over the intersection with that
    range and is ``inf`` when the intersection is empty.
    """
    critical = critical_points(model) if critical is None else critical
    s_left, s_right = _slope_limits(model, critical)
    lo, hi = max(a, s_left), min(b, s_right)
    if lo > hi or (open_interval and lo == hi and not a < lo < b):
        return math.inf
    if lo == hi:
        return legendre(model, lo, critical)

    def rate(x: float) -> float:
        return legendre(model, x, critical)

    result = optimize.minimize_scalar(rate, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return min(rate(lo), rate(hi), float(result.fun))


def f_t(model: EnvModel, t: float, p: float) -> float:
    """Returns f_t(p) = Lambda(p t) / p - Lambda(t)."""
    return float(lambda_(model, p * t)) / p - float(lambda_(model, t))


def lp_rate_bound(model: EnvModel, t: float, p: float) -> float:
    """Exponential rate bounding (E|W_{n+1}(t) - W_n(t)|^p)^(1/p).

    The bound is max{-Lambda(t), f_t(p)} for p in (1, 2] and
    max{-Lambda(t), f_t(p), f_t(2)} for p > 2.
    """
    if p <= 1.0:
        raise ValueError(f"p must exceed 1, got {p}")
    bound = max(-float(lambda_(model, t)), f_t(model, t, p))
    if p > 2.0:
        bound = max(bound, f_t(model, t, 2.0))
    return bound


def speed(model: EnvModel, critical: tuple[float, float] | None = None) -> float:
    """Returns lim R_n / n = Lambda'(t_+)."""
    _, t_plus = critical_points(model) if critical is None else critical
    return _edge_slope(model, t_plus)


def log_corrected_speed(model: EnvModel, n: int, critical: tuple[float, float] | None = None) -> float:
    """Returns the speed less the logarithmic delay 3 log(n) / (2 t_+ n).

    The delay is the one of a constant environment. Infinite t_+ gives the
    plain speed.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    critical = critical_points(model) if critical is None else critical
    v, t_plus = speed(model, critical), critical[1]
    if not math.isfinite(t_plus) or t_plus <= 0.0:
        return v
    return v - 1.5 * math.log(n) / (t_plus * n)


@dataclass(frozen=True)
class RateTable:
    t_grid: np.ndarray
    lam: np.ndarray
    lam_prime: np.ndarray
    lam_bar: np.ndarray
    lam_tilde: np.ndarray
    x_grid: np.ndarray
    legendre: np.ndarray
    t_minus: float
    t_plus: float
    t1: float
    t2: float
    case: Case
    exposed: tuple[float, float] | None
    sigma2: float

    def header(self) -> dict[str, object]:
        return {
            "t_minus": self.t_minus,
            "t_plus": self.t_plus,
            "t1": self.t1,
            "t2": self.t2,
            "case": self.case,
            "exposed": None if self.exposed is None else list(self.exposed),
            "sigma2": self.sigma2,
        }


def rate_table(model: EnvModel, t_grid: np.ndarray, x_grid: np.ndarray) -> RateTable:
    """Tabulates every rate quantity on the given grids."""
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    critical = critical_points(model)
    classification = classify_case(model, critical)
    lam_bar, lam_tilde = free_energy(model, t_grid, critical)
    table = RateTable(
        t_grid=t_grid,
        lam=np.asarray(lambda_(model, t_grid)),
        lam_prime=np.asarray(lambda_prime(model, t_grid)),
        lam_bar=lam_bar,
        lam_tilde=lam_tilde,
        x_grid=x_grid,
        legendre=np.array([legendre(model, float(x), critical) for x in x_grid]),
        t_minus=critical[0],
        t_plus=critical[1],
        t1=classification.t1,
        t2=classification.t2,
        case=classification.case,
        exposed=classification.exposed,
        sigma2=sigma2(model),
    )
    logger.info("Rate table: case %s, t_- = %.6g, t_+ = %.6g", table.case, table.t_minus, table.t_plus)
    return table
