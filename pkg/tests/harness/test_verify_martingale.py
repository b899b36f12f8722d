"""Tests the martingale verifier."""

import pytest

from brwire.env_model import EnvModel
from brwire.harness.martingale import monotonicity_note, verify_martingale


def test_initial_generation_is_exact(base_model: EnvModel) -> None:
    report = verify_martingale(base_model, 0.5, 3, 20, seed=0)
    first = report.rows[0]
    assert first["w_mean"] == 1.0
    assert first["w_se"] == 0.0
    assert first["w_z"] == 0.0
    assert all(row["w_target"] == 1.0 for row in report.rows)


def test_needs_two_replicas(base_model: EnvModel) -> None:
    with pytest.raises(ValueError):
        verify_martingale(base_model, 0.5, 3, 1, seed=0)


def test_monotonicity_tolerance_is_reported(base_model: EnvModel) -> None:
    report = verify_martingale(base_model, 0.5, 3, 20, seed=0, se_multiplier=2.5)
    assert monotonicity_note(2.5) in report.notes
    assert "2.5 standard errors" in monotonicity_note(2.5)


def test_annealed_mode_skips_the_shared_target(immigration_model: EnvModel) -> None:
    report = verify_martingale(immigration_model, 0.5, 4, 20, seed=0, mode="annealed")
    assert report.parameters["mode"] == "annealed"
    assert [check.name for check in report.checks] == ["w_bar_mean", "w_nondecreasing"]
    assert "w_target" not in report.columns
    assert any("annealed" in note for note in report.notes)


@pytest.mark.slow
@pytest.mark.timeout(600)
def test_martingale_means(immigration_model: EnvModel) -> None:
    report = verify_martingale(immigration_model, 1.0, 10, 500, seed=0, workers=2)
    assert report.status == "pass", report.checks
    assert report.threshold == 3.0
    assert report.parameters["mode"] == "quenched_xi_and_Y"
    targets = [row["w_target"] for row in report.rows]
    assert targets == sorted(targets)
    assert targets[-1] > 1.0
