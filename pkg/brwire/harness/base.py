"""Defines the report type shared by every verifier, plus common helpers."""

import logging
import math
from typing import Any, Literal, Sequence

import numpy as np
from pydantic import BaseModel, Field

from brwire.env_model import EnvModel, validate
from brwire.errors import HypothesisUnmetError, ModelValidationError
from brwire.simulator import SimConfig, Trajectory, simulate_replicas

logger = logging.getLogger(__name__)

Status = Literal["pass", "fail", "hypothesis_unmet"]

FINITE_N_NOTE = "Tolerances are acceptance choices for finite n; the limits carry no convergence rates."


class Check(BaseModel):
    """One pass/fail criterion of a verifier.

    Diagnostic checks (``gating=False``) are reported but do not decide the
    status.
    """

    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""
    gating: bool = True


class VerificationReport(BaseModel):
    """The outcome of one verifier.

    ``rows`` is the statistic-versus-n table written to CSV; ``columns``
    fixes its column order. The report passes iff every gating check
    passes; the first gating check is the headline criterion whose
    discrepancy and threshold are echoed at the top level.
    """

    verifier: str
    status: Status
    discrepancy: float | None = None
    threshold: float | None = None
    checks: list[Check] = Field(default_factory=list)
    columns: list[str] = Field(default_factory=list)
    rows: list[dict[str, Any]] = Field(default_factory=list)
    parameters: dict[str, Any] = Field(default_factory=dict)
    replicas: int = 1
    seeds: list[int] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)
    config_hash: str | None = None

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    @classmethod
    def from_checks(
        cls,
        verifier: str,
        checks: Sequence[Check],
        **fields: Any,  # noqa: ANN401
    ) -> "VerificationReport":
        gating = [c for c in checks if c.gating]
        failed = [c.name for c in gating if not c.passed]
        status: Status = "fail" if failed else "pass"
        headline = gating[0]
        notes = [FINITE_N_NOTE, *fields.pop("notes", [])]
        if failed:
            notes.append(f"Failed at this finite n: {', '.join(failed)}")
        report = cls(
            verifier=verifier,
            status=status,
            discrepancy=headline.value,
            threshold=headline.threshold,
            checks=list(checks),
            notes=notes,
            **fields,
        )
        for check in checks:
            logger.info(
                "%s: %s = %.6g (threshold %.6g) %s%s",
                verifier,
                check.name,
                check.value,
                check.threshold,
                "ok" if check.passed else "FAILED",
                "" if check.gating else " (diagnostic)",
            )
        return report

    @classmethod
    def hypothesis_unmet(
        cls,
        verifier: str,
        error: HypothesisUnmetError,
        **fields: Any,  # noqa: ANN401
    ) -> "VerificationReport":
        logger.warning("%s skipped: %s", verifier, error)
        return cls(verifier=verifier, status="hypothesis_unmet", notes=[str(error)], **fields)


def upper_check(name: str, value: float, threshold: float, detail: str = "", gating: bool = True) -> Check:
    """Passes when ``value <= threshold``; NaN never passes."""
    return Check(
        name=name,
        value=value,
        threshold=threshold,
        passed=bool(value <= threshold),
        detail=detail,
        gating=gating,
    )


def gap(statistic: float, target: float) -> float:
    """Absolute difference that treats two equal infinities as agreeing."""
    if statistic == target:
        return 0.0
    return abs(statistic - target)


def require_valid(model: EnvModel) -> None:
    report = validate(model)
    if not report.passed:
        raise ModelValidationError("; ".join(c.message for c in report.failures))


def require_centered(model: EnvModel) -> None:
    if not model.is_centered:
        raise HypothesisUnmetError("The verifier needs every environment state to be centered")


def with_grid_points(t_grid: np.ndarray, points: Sequence[float]) -> np.ndarray:
    """Adds the given t-values to a grid so that transforms are tabulated there."""
    return np.round(np.union1d(np.asarray(t_grid, dtype=float), np.asarray(points, dtype=float)), 12)


def grid_index(t_grid: np.ndarray, t: float) -> int:
    return int(np.argmin(np.abs(t_grid - round(t, 12))))


def run_replicas(model: EnvModel, sim: SimConfig) -> list[Trajectory]:
    require_valid(model)
    return simulate_replicas(model, sim)


def safe_log(value: float) -> float:
    return math.log(value) if value > 0 else -math.inf


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error."""
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, math.inf
    return mean, float(np.std(values, ddof=1) / math.sqrt(values.size))
