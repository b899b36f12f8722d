"""Defines the command line interface.

Every subcommand reads the same config file and writes its artifacts under
``<output_dir>/<subcommand>/``:

```bash
brwire rates --config base
brwire verify-decomposition --config markov --out runs/ci
```
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

import colorlogging

from brwire.errors import CapExceededError, ConfigError, ModelValidationError, UnclassifiedCaseError
from brwire.functionals import W, W_bar, decomposition_residuals
from brwire.harness import VERIFIERS, VerificationReport
from brwire.harness.base import require_valid
from brwire.rates import rate_table
from brwire.settings import LoadedConfig, load_config
from brwire.simulator import simulate_replicas
from brwire.utils.artifacts import software_versions, write_csv, write_json

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG_ERROR = 2
EXIT_CAP_EXCEEDED = 3

# Checked in order; the first matching class wins.
EXIT_CODES: list[tuple[type[Exception], int]] = [
    (ConfigError, EXIT_CONFIG_ERROR),
    (ModelValidationError, EXIT_CONFIG_ERROR),
    (CapExceededError, EXIT_CAP_EXCEEDED),
    (UnclassifiedCaseError, EXIT_FAIL),
]

REPLICA_KEYS = ("simulation.replicas", "harness.lp_rate.replicas", "harness.martingale.replicas")


def _write_manifest(out: Path, subcommand: str, config: LoadedConfig, status: str, **extra: object) -> None:
    sim = config.settings.simulation
    write_json(
        out / "manifest.json",
        {
            "subcommand": subcommand,
            "config": str(config.source),
            "config_hash": config.config_hash,
            "seed": sim.seed,
            "replicas": sim.replicas,
            "workers": sim.workers,
            "status": status,
            "versions": software_versions(),
            **extra,
        },
    )


def simulate_command(config: LoadedConfig, out: Path) -> int:
    sim = config.sim_config()
    trajectories = simulate_replicas(config.model, sim)
    generation_rows = []
    functional_rows = []
    for trajectory in trajectories:
        b = trajectory.normalizers.b
        counts = trajectory.immigration.counts
        for summary in trajectory.summaries:
            n = summary.index
            generation_rows.append(
                {
                    "replica": trajectory.replica,
                    "n": n,
                    "state": int(trajectory.state_indices[n - 1]) if n > 0 else None,
                    "total": summary.total,
                    "root_total": summary.root_total,
                    "immigrants": int(counts[n - 1]) if n > 0 else 0,
                    "rightmost": summary.rightmost,
                    "b_n": float(b[n]),
                }
            )
        for t in trajectory.decomposition_t:
            w, w_bar = W(trajectory, float(t)), W_bar(trajectory, float(t))
            residuals = decomposition_residuals(trajectory, float(t))
            for summary in trajectory.summaries:
                n = summary.index
                functional_rows.append(
                    {
                        "replica": trajectory.replica,
                        "n": n,
                        "t": float(t),
                        "W": float(w[n]),
                        "W_bar": float(w_bar[n]),
                        "residual": float(residuals[n]),
                        "rightmost": summary.rightmost,
                        "b_n": float(b[n]),
                    }
                )
    write_csv(out / "generations.csv", list(generation_rows[0]), generation_rows)
    if functional_rows:
        write_csv(out / "functionals.csv", list(functional_rows[0]), functional_rows)
    _write_manifest(out, "simulate", config, "pass", cap_exceeded=False)
    return EXIT_PASS


def rates_command(config: LoadedConfig, out: Path) -> int:
    require_valid(config.model)
    table = rate_table(config.model, config.t_grid, config.x_grid)
    write_csv(
        out / "rates_t.csv",
        ["t", "lambda", "lambda_prime", "lambda_bar", "lambda_tilde"],
        (
            {"t": t, "lambda": lam, "lambda_prime": lp, "lambda_bar": bar, "lambda_tilde": tilde}
            for t, lam, lp, bar, tilde in zip(
                table.t_grid, table.lam, table.lam_prime, table.lam_bar, table.lam_tilde
            )
        ),
    )
    write_csv(
        out / "rates_x.csv",
        ["x", "legendre"],
        ({"x": x, "legendre": value} for x, value in zip(table.x_grid, table.legendre)),
    )
    write_json(out / "rates.json", table.header())
    _write_manifest(out, "rates", config, "pass")
    return EXIT_PASS


def _verify_command(name: str) -> Callable[[LoadedConfig, Path], int]:
    verifier = VERIFIERS[name]

    def command(config: LoadedConfig, out: Path) -> int:
        report: VerificationReport = verifier(config)
        report = report.model_copy(update={"config_hash": config.config_hash})
        write_json(out / "report.json", report.model_dump())
        if report.rows:
            write_csv(out / "statistic.csv", report.columns, report.rows)
        _write_manifest(out, f"verify-{name}", config, report.status, cap_exceeded=False)
        logger.info("verify-%s: %s", name, report.status)
        return EXIT_PASS if report.passed else EXIT_FAIL

    return command


COMMANDS: dict[str, Callable[[LoadedConfig, Path], int]] = {
    "simulate": simulate_command,
    "rates": rates_command,
    **{f"verify-{name}": _verify_command(name) for name in VERIFIERS},
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brwire", description="Branching random walks with immigration.")
    parser.add_argument("subcommand", choices=sorted(COMMANDS), help="What to run.")
    parser.add_argument("--config", required=True, help="Config file, or the name of a bundled config.")
    parser.add_argument("--seed", type=int, default=None, help="Override simulation.seed.")
    parser.add_argument("--out", default=None, help="Override output_dir.")
    parser.add_argument("--replicas", type=int, default=None, help="Override every replica count.")
    parser.add_argument("--workers", type=int, default=None, help="Override simulation.workers.")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    parser.add_argument("overrides", nargs="*", help="Extra dotted key=value config overrides.")
    return parser


def _overrides(args: argparse.Namespace) -> list[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"simulation.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output_dir={args.out}")
    if args.replicas is not None:
        overrides.extend(f"{key}={args.replicas}" for key in REPLICA_KEYS)
    if args.workers is not None:
        overrides.append(f"simulation.workers={args.workers}")
    return overrides


def _exit_code(error: Exception) -> int | None:
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return None


def run(argv: Sequence[str] | None = None) -> int:
    """Runs one subcommand.

    Args:
        argv: The command line arguments, without the program name.

    Returns:
        0 if the run passed, 1 if a verifier failed, 2 for config errors and
        3 if the particle cap was exceeded.
    """
    colorlogging.configure()
    parser = _parser()
    try:
        args = parser.parse_intermixed_args(argv)
    except SystemExit as e:
        return EXIT_PASS if e.code == 0 else EXIT_CONFIG_ERROR
    if args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    config: LoadedConfig | None = None
    try:
        config = load_config(args.config, _overrides(args))
        out = config.output_dir / args.subcommand
        logger.info("Running %s with config %s (hash %s)", args.subcommand, config.source, config.config_hash)
        return COMMANDS[args.subcommand](config, out)
    except Exception as e:
        if (code := _exit_code(e)) is None:
            raise
        logger.error("%s", e)
        if isinstance(e, CapExceededError) and config is not None:
            _write_manifest(
                config.output_dir / args.subcommand,
                args.subcommand,
                config,
                "cap_exceeded",
                cap_exceeded=True,
                cap_generation=e.generation,
                cap_requested=e.requested,
            )
        return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    # python -m brwire.cli
    main()
