"""Checks that the normalized empirical distribution of positions is standard Gaussian."""

import logging
from dataclasses import replace
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from brwire.env_model import EnvModel
from brwire.errors import HypothesisUnmetError
from brwire.functionals import CountingMeasure, cdf_ratio
from brwire.harness.base import Check, VerificationReport, require_centered, require_valid, upper_check
from brwire.rates import sigma2
from brwire.settings import LoadedConfig
from brwire.simulator import SimConfig, simulate

logger = logging.getLogger(__name__)

NAME = "clt"


def ks_distance(measure: CountingMeasure, b_n: float, x_grid: np.ndarray, center: float = 0.0) -> float:
    """Returns sup_x |Z_n(-inf, center + b_n x] / Z_n(R) - Phi(x)| over the grid.

    Args:
        measure: The counting measure of generation n.
        b_n: The quenched spread sqrt(sum_k sigma_k^2).
        x_grid: The points at which the two distribution functions are compared.
        center: Shift applied before scaling; zero for the uncentred ratio.
    """
    return float(np.max(np.abs(cdf_ratio(measure, center + b_n * x_grid) - ndtr(x_grid))))


def _distances(
    model: EnvModel, sim: SimConfig, n_list: Sequence[int], x_grid: np.ndarray
) -> list[tuple[float, float]]:
    trajectory = simulate(model, sim)
    distances = []
    for n in n_list:
        measure, b_n = trajectory.measure(n), float(trajectory.normalizers.b[n])
        center = float(np.mean(measure.positions))
        distances.append((ks_distance(measure, b_n, x_grid), ks_distance(measure, b_n, x_grid, center)))
    return distances


def verify_clt(
    model: EnvModel,
    n: int,
    seed: int,
    *,
    n_list: Sequence[int] = (10, 14, 18),
    x_grid: np.ndarray | None = None,
    threshold: float = 0.05,
    trend_seeds: int = 5,
    max_particles: int = 2**23,
) -> VerificationReport:
    """Compares Z_n(-inf, b_n x] / Z_n(R) with the standard Gaussian CDF.

    The headline check is the distance at generation ``n`` for ``seed``.
    The trend check asks that the median distance over ``trend_seeds``
    consecutive seeds is no larger at the last entry of ``n_list`` than at
    the first. The distance after recentring at the empirical mean is
    reported as a diagnostic.
    """
    try:
        require_centered(model)
        if not 0.0 < sigma2(model) < np.inf:
            raise HypothesisUnmetError("The averaged displacement variance must be positive and finite")
    except HypothesisUnmetError as e:
        return VerificationReport.hypothesis_unmet(NAME, e, seeds=[seed])
    require_valid(model)

    x_grid = np.linspace(-4.0, 4.0, 401) if x_grid is None else np.asarray(x_grid, dtype=float)
    n_values = sorted({*n_list, n})
    seeds = [seed + i for i in range(max(trend_seeds, 1))]
    sim = SimConfig(
        n_generations=max(n_values),
        seed=seed,
        max_particles=max_particles,
        keep_measures="all",
        t_grid=np.zeros(1),
        decomposition_t=(),
    )

    rows = []
    table: dict[int, list[tuple[float, float]]] = {}
    for s in seeds:
        distances = _distances(model, replace(sim, seed=s), n_values, x_grid)
        table[s] = distances
        rows.extend(
            {"seed": s, "n": n_i, "distance": d, "recentred_distance": r}
            for n_i, (d, r) in zip(n_values, distances)
        )
        logger.debug("Seed %d distances %s", s, distances)

    headline, recentred = table[seed][n_values.index(n)]
    trend = [n_i for n_i in n_values if n_i in n_list]
    medians = {n_i: float(np.median([table[s][n_values.index(n_i)][0] for s in seeds])) for n_i in trend}
    checks: list[Check] = [upper_check(f"distance_n{n}", headline, threshold)]
    if len(trend) >= 2:
        checks.append(
            upper_check(
                "median_trend",
                medians[trend[-1]],
                medians[trend[0]],
                detail=f"median distance at n={trend[-1]} versus n={trend[0]} over {len(seeds)} seeds",
            )
        )
    checks.append(
        upper_check(
            f"recentred_distance_n{n}",
            recentred,
            threshold,
            detail="distance after shifting by the empirical mean",
            gating=False,
        )
    )
    return VerificationReport.from_checks(
        NAME,
        checks,
        columns=["seed", "n", "distance", "recentred_distance"],
        rows=rows,
        parameters={"n": n, "n_list": list(n_list), "x_points": int(x_grid.size), "medians": medians},
        seeds=seeds,
    )


def run(config: LoadedConfig) -> VerificationReport:
    settings = config.settings.harness.clt
    n_list = list(settings.n_list)
    return verify_clt(
        config.model,
        max(n_list),
        config.settings.simulation.seed,
        n_list=n_list,
        x_grid=np.linspace(settings.x_min, settings.x_max, settings.x_points),
        threshold=settings.threshold,
        trend_seeds=settings.trend_seeds,
        max_particles=config.settings.simulation.max_particles,
    )
