"""Checks the mean of Wbar_n(t) (a martingale) and of W_n(t) (a sub-martingale)."""

import logging
import math

import numpy as np

from brwire.env_model import EnvModel
from brwire.functionals import W, W_bar, submartingale_mean
from brwire.harness.base import Check, VerificationReport, run_replicas
from brwire.settings import LoadedConfig
from brwire.simulator import SimConfig, SimMode

logger = logging.getLogger(__name__)

NAME = "martingale"

ZERO_SE_TOLERANCE = 1e-12


def _standardized(mean: float, target: float, se: float) -> float:
    """Returns |mean - target| in standard errors; a zero SE needs exact agreement."""
    if se > 0.0:
        return abs(mean - target) / se
    return 0.0 if abs(mean - target) <= ZERO_SE_TOLERANCE * max(1.0, abs(target)) else math.inf


def _se(values: np.ndarray) -> np.ndarray:
    return np.std(values, axis=0, ddof=1) / math.sqrt(values.shape[0])


def monotonicity_note(se_multiplier: float) -> str:
    return (
        f"w_nondecreasing tolerates a drop in the sample mean of W of up to {se_multiplier:g} "
        "standard errors of each increment."
    )


def verify_martingale(
    model: EnvModel,
    t: float,
    n: int,
    replicas: int,
    seed: int,
    *,
    se_multiplier: float = 3.0,
    mode: SimMode = "quenched_xi_and_Y",
    workers: int = 1,
    max_particles: int = 2**23,
) -> VerificationReport:
    """Compares replica means of Wbar_k(t) and W_k(t) with their exact means for k <= n.

    The mean of Wbar_k(t) is 1 under every mode. When replicas share the
    environment and the immigrants, the mean of W_k(t) is also known:
    1 + sum_{j <= k} Pi_j(t)^-1 Y_{j-1}(t). Under the other modes that
    target differs between replicas, so only the Wbar target and the
    monotonicity of the sample mean of W_k(t) are checked.
    """
    if replicas < 2:
        raise ValueError(f"Standard errors need at least two replicas, got {replicas}")
    sim = SimConfig(
        n_generations=n,
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
    w_bar = np.array([W_bar(trajectory, t) for trajectory in trajectories])
    shared_target = mode == "quenched_xi_and_Y"
    target = submartingale_mean(trajectories[0], t) if shared_target else None

    w_mean, w_se = np.mean(w, axis=0), _se(w)
    bar_mean, bar_se = np.mean(w_bar, axis=0), _se(w_bar)
    increments = np.diff(w, axis=1)
    inc_mean, inc_se = np.mean(increments, axis=0), _se(increments)

    rows = []
    for k in range(n + 1):
        row = {
            "n": k,
            "w_bar_mean": float(bar_mean[k]),
            "w_bar_se": float(bar_se[k]),
            "w_bar_z": _standardized(float(bar_mean[k]), 1.0, float(bar_se[k])),
            "w_mean": float(w_mean[k]),
            "w_se": float(w_se[k]),
        }
        if target is not None:
            row["w_target"] = float(target[k])
            row["w_z"] = _standardized(float(w_mean[k]), float(target[k]), float(w_se[k]))
        rows.append(row)

    worst_bar = max(r["w_bar_z"] for r in rows)
    drops = [
        -float(m) / float(s) if s > 0 else (math.inf if m < -ZERO_SE_TOLERANCE else 0.0)
        for m, s in zip(inc_mean, inc_se)
    ]
    worst_drop = max([0.0, *drops])
    checks = [
        Check(name="w_bar_mean", value=worst_bar, threshold=se_multiplier, passed=worst_bar <= se_multiplier),
    ]
    notes = [monotonicity_note(se_multiplier)]
    if target is not None:
        worst_w = max(r["w_z"] for r in rows)
        checks.append(Check(name="w_mean", value=worst_w, threshold=se_multiplier, passed=worst_w <= se_multiplier))
    else:
        notes.append(f"The W target needs shared environment and immigrants; skipped under mode {mode}.")
    checks.append(
        Check(name="w_nondecreasing", value=worst_drop, threshold=se_multiplier, passed=worst_drop <= se_multiplier)
    )
    if target is not None:
        checks.append(
            Check(
                name="target_nondecreasing",
                value=float(np.sum(np.diff(target) < 0)),
                threshold=0.0,
                passed=bool(np.all(np.diff(target) >= 0)),
            )
        )
    return VerificationReport.from_checks(
        NAME,
        checks,
        columns=list(rows[0]),
        rows=rows,
        parameters={"t": t, "n": n, "mode": mode, "has_immigration": model.has_immigration},
        replicas=replicas,
        seeds=[seed],
        notes=notes,
    )


def run(config: LoadedConfig) -> VerificationReport:
    settings = config.settings.harness.martingale
    return verify_martingale(
        config.model,
        settings.t,
        settings.n,
        settings.replicas,
        config.settings.simulation.seed,
        se_multiplier=settings.se_multiplier,
        mode=settings.mode,  # type: ignore[arg-type]
        workers=config.settings.simulation.workers,
        max_particles=config.settings.simulation.max_particles,
    )
