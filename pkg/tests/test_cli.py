"""Tests the command line interface end to end."""

import json
import math
from pathlib import Path

import pytest
from pytest_mock import MockerFixture

from brwire.cli import EXIT_CAP_EXCEEDED, EXIT_CONFIG_ERROR, EXIT_FAIL, EXIT_PASS, run
from brwire.errors import UnclassifiedCaseError


def test_rates(tmp_path: Path) -> None:
    assert run(["rates", "--config", "base", "--out", str(tmp_path), "--quiet"]) == EXIT_PASS
    header = json.loads((tmp_path / "rates" / "rates.json").read_text())
    assert header["case"] == "I"
    assert header["t_plus"] == pytest.approx(math.sqrt(2.0 * math.log(2.0)), abs=1e-8)
    assert header["t_minus"] == pytest.approx(-header["t_plus"], abs=1e-8)
    assert header["t1"] == "-inf"

    lines = (tmp_path / "rates" / "rates_t.csv").read_text().splitlines()
    assert lines[0] == "t,lambda,lambda_prime,lambda_bar,lambda_tilde"
    assert len(lines) == 82
    manifest = json.loads((tmp_path / "rates" / "manifest.json").read_text())
    assert manifest["status"] == "pass"
    assert len(manifest["config_hash"]) == 16


def test_config_errors(tmp_path: Path, config_file: Path) -> None:
    assert run(["rates", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG_ERROR
    assert run(["rates", "--config", str(config_file), "simulation.bogus=1"]) == EXIT_CONFIG_ERROR
    assert run(["rates", "--config", str(config_file), "model.states.0.offspring.m=0.5"]) == EXIT_CONFIG_ERROR
    assert run(["simulate", "--config", str(config_file), "--seed", "-1"]) == EXIT_CONFIG_ERROR
    assert run(["no-such-command", "--config", str(config_file)]) == EXIT_CONFIG_ERROR


def test_simulate_writes_tables(tmp_path: Path, config_file: Path) -> None:
    assert run(["simulate", "--config", str(config_file), "simulation.n_generations=5"]) == EXIT_PASS
    out = tmp_path / "runs" / "simulate"
    generations = (out / "generations.csv").read_text().splitlines()
    assert generations[0] == "replica,n,state,total,root_total,immigrants,rightmost,b_n"
    assert generations[-1].startswith("0,5,0,32,32,0,")
    functionals = (out / "functionals.csv").read_text().splitlines()
    assert len(functionals) == 1 + 5 * 6
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["cap_exceeded"] is False


def test_cap_exceeded(tmp_path: Path, config_file: Path) -> None:
    code = run(["simulate", "--config", str(config_file), "simulation.max_particles=10"])
    assert code == EXIT_CAP_EXCEEDED
    manifest = json.loads((tmp_path / "runs" / "simulate" / "manifest.json").read_text())
    assert manifest["status"] == "cap_exceeded"
    assert manifest["cap_exceeded"] is True
    assert manifest["cap_generation"] == 4
    assert manifest["cap_requested"] == 16


@pytest.mark.timeout(300)
def test_outputs_do_not_depend_on_workers(tmp_path: Path) -> None:
    def simulate(out: Path, workers: int) -> bytes:
        args = ["simulate", "--config", "immigration", "--out", str(out), "--replicas", "3"]
        assert run([*args, "--workers", str(workers), "simulation.n_generations=8"]) == EXIT_PASS
        return (out / "simulate" / "generations.csv").read_bytes() + (out / "simulate" / "functionals.csv").read_bytes()

    first = simulate(tmp_path / "a", 1)
    assert simulate(tmp_path / "b", 1) == first
    assert simulate(tmp_path / "c", 2) == first


@pytest.mark.timeout(300)
def test_verify_decomposition(tmp_path: Path) -> None:
    args = ["verify-decomposition", "--config", "markov", "--out", str(tmp_path), "harness.decomposition.runs=3"]
    assert run(args) == EXIT_PASS
    report = json.loads((tmp_path / "verify-decomposition" / "report.json").read_text())
    assert report["status"] == "pass"
    assert report["seeds"] == [0, 1, 2]
    assert report["config_hash"] is not None
    assert (tmp_path / "verify-decomposition" / "statistic.csv").exists()


def test_failed_threshold_exits_with_one(tmp_path: Path) -> None:
    args = ["verify-decomposition", "--config", "markov", "--out", str(tmp_path)]
    assert run([*args, "harness.decomposition.runs=1", "harness.decomposition.threshold=-1.0"]) == EXIT_FAIL


def test_unclassified_case(mocker: MockerFixture, tmp_path: Path) -> None:
    mocker.patch("brwire.cli.rate_table", side_effect=UnclassifiedCaseError(1.0, 2.0, -1.0, 1.5))
    assert run(["rates", "--config", "base", "--out", str(tmp_path)]) == EXIT_FAIL


def test_harness_mode_reaches_the_verifier(tmp_path: Path) -> None:
    args = ["verify-martingale", "--config", "immigration", "--out", str(tmp_path), "--replicas", "10"]
    code = run([*args, "harness.martingale.n=3", "harness.martingale.mode=annealed"])
    assert code in (EXIT_PASS, EXIT_FAIL)
    report = json.loads((tmp_path / "verify-martingale" / "report.json").read_text())
    assert report["parameters"]["mode"] == "annealed"
    assert [check["name"] for check in report["checks"]] == ["w_bar_mean", "w_nondecreasing"]


def test_unknown_harness_mode_is_a_config_error(tmp_path: Path) -> None:
    args = ["verify-lp-rate", "--config", "base", "--out", str(tmp_path), "harness.lp_rate.mode=sometimes"]
    assert run(args) == EXIT_CONFIG_ERROR
