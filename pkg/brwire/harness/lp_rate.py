"""Checks the exponential L^p convergence rate of W_n(t)."""

import logging
import math

import numpy as np

from brwire.env_model import EnvModel
from brwire.errors import HypothesisUnmetError
from brwire.functionals import W
from brwire.harness.base import VerificationReport, run_replicas, upper_check
from brwire.rates import f_t, lambda_, lp_rate_bound
from brwire.settings import LoadedConfig
from brwire.simulator import SimConfig, SimMode

logger = logging.getLogger(__name__)

NAME = "lp_rate"

SHARED_MODE_NOTE = "The bound is stated for replicas sharing the environment and the immigrants."


def check_hypotheses(model: EnvModel, t: float, p: float) -> None:
    """Raises HypothesisUnmetError unless Lambda(t) > 0 and the f_t terms are negative."""
    if p <= 1.0:
        raise HypothesisUnmetError(f"p must exceed 1, got {p}")
    if (lam := float(lambda_(model, t))) <= 0.0:
        raise HypothesisUnmetError(f"Lambda({t}) = {lam} is not positive")
    if (f_p := f_t(model, t, p)) >= 0.0:
        raise HypothesisUnmetError(f"f_t({p}) = {f_p} is not negative")
    if p > 2.0 and (f_2 := f_t(model, t, 2.0)) >= 0.0:
        raise HypothesisUnmetError(f"f_t(2) = {f_2} is not negative")


def verify_lp_rate(
    model: EnvModel,
    t: float,
    p: float,
    n: int,
    replicas: int,
    seed: int,
    *,
    epsilon: float = 0.1,
    mode: SimMode = "quenched_xi_and_Y",
    workers: int = 1,
    max_particles: int = 2**23,
) -> VerificationReport:
    """Estimates E|W_{k+1}(t) - W_k(t)|^p over replicas simulated under ``mode``.

    The rate statistic (1/k) log(estimate^(1/p)) at k = n must not exceed
    the bound max{-Lambda(t), f_t(p)} (with f_t(2) added for p > 2) by more
    than ``epsilon``. Under ``quenched_xi_and_Y`` the estimate is the quenched
    moment E_{xi,Y}; under the other modes it also averages over whatever
    the replicas do not share.
    """
    parameters = {"t": t, "p": p, "n": n}
    try:
        check_hypotheses(model, t, p)
    except HypothesisUnmetError as e:
        return VerificationReport.hypothesis_unmet(NAME, e, parameters=parameters, replicas=replicas, seeds=[seed])

    bound = lp_rate_bound(model, t, p)
    sim = SimConfig(
        n_generations=n + 1,
        seed=seed,
        max_particles=max_particles,
        mode=mode,
        replicas=replicas,
        workers=workers,
        keep_measures="none",
        t_grid=np.array([t]),
        decomposition_t=(),
    )
    trajectories = run_replicas(model, sim)
    w = np.array([W(trajectory, t) for trajectory in trajectories])
    moments = np.mean(np.abs(np.diff(w, axis=1)) ** p, axis=0)

    rows = []
    for k in range(1, n + 1):
        moment = float(moments[k])
        statistic = math.log(moment) / (p * k) if moment > 0 else -math.inf
        rows.append({"n": k, "moment": moment, "statistic": statistic, "bound": bound})

    statistic = rows[-1]["statistic"]
    checks = [upper_check("rate_excess", max(statistic - bound, 0.0), epsilon, detail=f"bound {bound:.6g}")]
    return VerificationReport.from_checks(
        NAME,
        checks,
        columns=list(rows[0]),
        rows=rows,
        parameters={
            **parameters,
            "mode": mode,
            "bound": bound,
            "f_t_p": f_t(model, t, p),
            "lambda_t": float(lambda_(model, t)),
        },
        replicas=replicas,
        seeds=[seed],
        notes=[] if mode == "quenched_xi_and_Y" else [SHARED_MODE_NOTE],
    )


def run(config: LoadedConfig) -> VerificationReport:
    settings = config.settings.harness.lp_rate
    return verify_lp_rate(
        config.model,
        settings.t,
        settings.p,
        settings.n,
        settings.replicas,
        config.settings.simulation.seed,
        epsilon=settings.epsilon,
        mode=settings.mode,  # type: ignore[arg-type]
        workers=config.settings.simulation.workers,
        max_particles=config.settings.simulation.max_particles,
    )
