"""Checks (1/n) log Z~_n(t) against the free energy, and the exact bounds behind it."""

import logging
import math
from typing import Sequence

import numpy as np

from brwire.env_model import EnvModel
from brwire.functionals import log_Y_k_of_t
from brwire.harness.base import (
    Check,
    VerificationReport,
    gap,
    grid_index,
    require_valid,
    upper_check,
    with_grid_points,
)
from brwire.rates import critical_points, free_energy, lambda_
from brwire.settings import LoadedConfig
from brwire.simulator import SimConfig, Trajectory, simulate

logger = logging.getLogger(__name__)

NAME = "free_energy"

ENVELOPE_RTOL = 1e-12

OUTER_NOTE = (
    "Beyond the critical points the statistic follows the extreme particle, whose position lags the linear "
    "branch by a correction of order log(n) / n; outer points converge from below."
)


def lower_bound_violations(trajectory: Trajectory) -> int:
    """Counts (generation, t) pairs where Z~_n(t) < max{Zbar_n(t), Y_{n-1}(t)}.

    The immigrant batch Y_{n-1} is the one that joined generation n. The
    comparison is exact, with no tolerance.
    """
    violations = 0
    for summary in trajectory.summaries[1:]:
        total = summary.log_laplace
        batch = np.array([log_Y_k_of_t(trajectory.immigration, summary.index - 1, t) for t in trajectory.t_grid])
        violations += int(np.sum(total < np.maximum(summary.log_laplace_root, batch)))
    return violations


def envelope_violations(trajectory: Trajectory) -> int:
    """Counts violations of Z~_n(t1) <= Z~_n(t0) exp((t1 - t0) R_n) on consecutive grid points."""
    dt = np.diff(trajectory.t_grid)
    violations = 0
    for summary in trajectory.summaries:
        log_z = summary.log_laplace
        bound = log_z[:-1] + dt * summary.rightmost
        slack = ENVELOPE_RTOL * np.maximum(1.0, np.abs(bound))
        violations += int(np.sum(log_z[1:] > bound + slack))
    return violations


def _notes(t_values: Sequence[float], critical: tuple[float, float]) -> list[str]:
    t_minus, t_plus = critical
    if not math.isfinite(t_plus):
        return ["t_+ is infinite; every t is an inner point"]
    return [OUTER_NOTE] if any(not t_minus < t < t_plus for t in t_values) else []


def verify_free_energy(
    model: EnvModel,
    t_grid: Sequence[float],
    n: int,
    seed: int,
    *,
    inner_threshold: float = 0.05,
    outer_threshold: float = 0.15,
    max_particles: int = 2**23,
    base_grid: np.ndarray | None = None,
) -> VerificationReport:
    """Compares (1/n) log Z~_n(t) with Lambda_tilde(t) for every t in ``t_grid``.

    Points strictly between the critical points use ``inner_threshold``,
    the others ``outer_threshold``. Besides the pointwise comparison at the
    final generation, every generation is checked for the exact lower bound
    Z~_n(t) >= max{Zbar_n(t), Y_{n-1}(t)} and for the envelope
    Z~_n(t1) <= Z~_n(t0) exp((t1 - t0) R_n). The first-moment bound
    max{Lambda(t), 0} is reported next to each statistic.
    """
    require_valid(model)
    t_values = sorted(float(t) for t in t_grid)
    grid = with_grid_points(np.zeros(0) if base_grid is None else base_grid, t_values)
    sim = SimConfig(n_generations=n, seed=seed, max_particles=max_particles, keep_measures="none", t_grid=grid)
    trajectory = simulate(model, sim)

    critical = critical_points(model)
    t_minus, t_plus = critical
    rows = []
    worst = {"inner": 0.0, "outer": 0.0}
    for t in t_values:
        idx = grid_index(grid, t)
        bar, tilde = free_energy(model, t, critical)
        region = "inner" if t_minus < t < t_plus else "outer"
        for summary in trajectory.summaries[1:]:
            k = summary.index
            statistic = float(summary.log_laplace[idx]) / k
            discrepancy = gap(statistic, float(tilde))
            rows.append(
                {
                    "n": k,
                    "t": t,
                    "region": region,
                    "statistic": statistic,
                    "target": float(tilde),
                    "lambda_bar": float(bar),
                    "first_moment_bound": max(float(lambda_(model, t)), 0.0),
                    "discrepancy": discrepancy,
                }
            )
            if k == n:
                worst[region] = max(worst[region], discrepancy)

    lower = lower_bound_violations(trajectory)
    envelope = envelope_violations(trajectory)
    checks: list[Check] = [
        upper_check("inner_discrepancy", worst["inner"], inner_threshold, detail=f"t in ({t_minus}, {t_plus})"),
        upper_check("outer_discrepancy", worst["outer"], outer_threshold),
        upper_check("lower_bound_violations", float(lower), 0.0),
        upper_check("envelope_violations", float(envelope), 0.0),
    ]
    logger.info("Free energy at n=%d over %d t-values", n, len(t_values))
    return VerificationReport.from_checks(
        NAME,
        checks,
        columns=list(rows[0]),
        rows=rows,
        parameters={"n": n, "t_values": t_values, "t_minus": t_minus, "t_plus": t_plus},
        seeds=[seed],
        notes=_notes(t_values, critical),
    )


def run(config: LoadedConfig) -> VerificationReport:
    settings = config.settings.harness.free_energy
    return verify_free_energy(
        config.model,
        list(settings.t_values),
        settings.n,
        config.settings.simulation.seed,
        inner_threshold=settings.inner_threshold,
        outer_threshold=settings.outer_threshold,
        max_particles=config.settings.simulation.max_particles,
        base_grid=config.t_grid,
    )
