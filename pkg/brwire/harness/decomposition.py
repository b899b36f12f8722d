"""Checks that W_n(t) equals its decomposition over founders, run by run."""

import logging
from typing import Sequence

import numpy as np

from brwire.env_model import EnvModel
from brwire.functionals import decomposition_residuals
from brwire.harness.base import VerificationReport, require_valid, upper_check
from brwire.settings import LoadedConfig
from brwire.simulator import SimConfig, simulate

logger = logging.getLogger(__name__)

NAME = "decomposition"


def verify_decomposition(
    model: EnvModel,
    n: int,
    runs: int,
    seed: int,
    *,
    t_values: Sequence[float] = (-2.0, -1.0, 0.0, 1.0, 2.0),
    threshold: float = 1e-9,
    max_particles: int = 2**23,
) -> VerificationReport:
    """Computes the largest relative decomposition residual over runs, generations and t.

    Run r uses seed ``seed + r``.
    """
    require_valid(model)
    seeds = [seed + r for r in range(runs)]
    rows = []
    for s in seeds:
        sim = SimConfig(
            n_generations=n,
            seed=s,
            max_particles=max_particles,
            keep_measures="none",
            t_grid=np.zeros(1),
            decomposition_t=tuple(t_values),
        )
        trajectory = simulate(model, sim)
        for t in t_values:
            residuals = decomposition_residuals(trajectory, t)
            rows.append(
                {
                    "seed": s,
                    "t": float(t),
                    "founders": len(trajectory.summaries[-1].founders),
                    "max_residual": float(np.max(residuals)),
                    "final_residual": float(residuals[-1]),
                }
            )
        logger.debug("Seed %d: %d founders", s, len(trajectory.summaries[-1].founders))

    worst = max(r["max_residual"] for r in rows)
    return VerificationReport.from_checks(
        NAME,
        [upper_check("max_residual", worst, threshold)],
        columns=list(rows[0]),
        rows=rows,
        parameters={"n": n, "runs": runs, "t_values": list(t_values)},
        seeds=seeds,
    )


def run(config: LoadedConfig) -> VerificationReport:
    settings = config.settings.harness.decomposition
    return verify_decomposition(
        config.model,
        settings.n,
        settings.runs,
        config.settings.simulation.seed,
        t_values=[float(t) for t in config.settings.simulation.decomposition_t],
        threshold=settings.threshold,
        max_particles=config.settings.simulation.max_particles,
    )
