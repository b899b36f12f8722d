"""Checks (1/n) log Z_n(n[a, b]) against the large-deviation bounds."""

import logging
import math
from typing import Sequence

import numpy as np

from brwire.env_model import EnvModel
from brwire.harness.base import VerificationReport, require_valid, safe_log, upper_check
from brwire.rates import CaseClassification, classify_case, critical_points, interval_infimum
from brwire.settings import LoadedConfig
from brwire.simulator import SimConfig, simulate

logger = logging.getLogger(__name__)

NAME = "ldp"


def rate_bounds(model: EnvModel, a: float, b: float) -> tuple[float, float, CaseClassification]:
    """Returns the (lower, upper) limits for (1/n) log Z_n(n[a, b]).

    The upper limit is -inf over [a, b] of Lambda_tilde^*. The lower limit is
    -inf over (a, b) of Lambda_tilde^* in case I, and over (a, b) intersected
    with the exposed interval in cases II and III (-inf when that
    intersection is empty).
    """
    critical = critical_points(model)
    classification = classify_case(model, critical)
    upper = -interval_infimum(model, a, b, open_interval=False, critical=critical)
    lo, hi = a, b
    if classification.exposed is not None:
        lo, hi = max(a, classification.exposed[0]), min(b, classification.exposed[1])
    lower = -interval_infimum(model, lo, hi, open_interval=True, critical=critical) if lo < hi else -math.inf
    return lower, upper, classification


def excess(statistic: float, lower: float, upper: float) -> float:
    """Distance from the statistic to [lower, upper]; equal infinities count as inside."""
    if statistic > upper and statistic != upper:
        return statistic - upper
    if statistic < lower and statistic != lower:
        return lower - statistic
    return 0.0


def verify_ldp(
    model: EnvModel,
    interval: tuple[float, float],
    n_list: Sequence[int],
    seed: int,
    *,
    epsilon: float = 0.1,
    max_particles: int = 2**23,
) -> VerificationReport:
    """Brackets (1/n) log Z_n(n[a, b]) between the rate-function bounds.

    An empty interval mass gives a statistic of -inf, which is consistent
    with the upper bound only when the rate function is infinite on [a, b].
    """
    require_valid(model)
    a, b = interval
    if a > b:
        raise ValueError(f"Interval [{a}, {b}] is empty")
    lower, upper, classification = rate_bounds(model, a, b)
    sim = SimConfig(
        n_generations=max(n_list),
        seed=seed,
        max_particles=max_particles,
        keep_measures="all",
        t_grid=np.zeros(1),
        decomposition_t=(),
    )
    trajectory = simulate(model, sim)

    rows = []
    for n in sorted(n_list):
        measure = trajectory.measure(n)
        mass = measure.mass(n * a, n * b)
        statistic = safe_log(mass) / n
        rows.append(
            {
                "n": n,
                "mass": mass,
                "statistic": statistic,
                "lower_target": lower,
                "upper_target": upper,
                "discrepancy": excess(statistic, lower, upper),
            }
        )
    empty_from = next((r["n"] for r in rows if r["mass"] == 0), None)
    checks = [upper_check("excess", rows[-1]["discrepancy"], epsilon)]
    return VerificationReport.from_checks(
        NAME,
        checks,
        columns=list(rows[0]),
        rows=rows,
        parameters={
            "a": a,
            "b": b,
            "n_list": list(n_list),
            "case": classification.case,
            "exposed": None if classification.exposed is None else list(classification.exposed),
            "first_empty_n": empty_from,
        },
        seeds=[seed],
    )


def run(config: LoadedConfig) -> VerificationReport:
    settings = config.settings.harness.ldp
    return verify_ldp(
        config.model,
        (settings.a, settings.b),
        list(settings.n_list),
        config.settings.simulation.seed,
        epsilon=settings.epsilon,
        max_particles=config.settings.simulation.max_particles,
    )
