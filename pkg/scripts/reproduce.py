"""Defines the script to check that runs are reproducible.

Each subcommand is run with one worker and again with several, and the CSV
artifacts of the two runs must be byte-identical. To run it, use:

```bash
python -m scripts.reproduce --config markov simulate verify-decomposition
```
"""

import argparse
import logging
import sys
import tempfile
from pathlib import Path

import colorlogging

from brwire.cli import EXIT_PASS, run

logger = logging.getLogger(__name__)


def _csv_bytes(out: Path) -> dict[str, bytes]:
    return {path.name: path.read_bytes() for path in sorted(out.glob("*.csv"))}


def reproduce(config: str, subcommand: str, workers: int, replicas: int, root: Path) -> bool:
    outputs = []
    for n_workers in (1, workers):
        out = root / f"{subcommand}-w{n_workers}"
        args = [subcommand, "--config", config, "--out", str(out), "--replicas", str(replicas)]
        code = run([*args, "--workers", str(n_workers), "--quiet"])
        if code != EXIT_PASS:
            logger.error("%s exited with %d using %d workers", subcommand, code, n_workers)
            return False
        outputs.append(_csv_bytes(out / subcommand))
    if outputs[0] != outputs[1]:
        differing = sorted(k for k in outputs[0].keys() | outputs[1].keys() if outputs[0].get(k) != outputs[1].get(k))
        logger.error("%s: %s differ between 1 and %d workers", subcommand, ", ".join(differing), workers)
        return False
    logger.info("%s: %d CSV files identical", subcommand, len(outputs[0]))
    return True


def main() -> None:
    colorlogging.configure()

    parser = argparse.ArgumentParser()
    parser.add_argument("subcommands", nargs="+", help="The subcommands to run.")
    parser.add_argument("--config", default="base", help="Config file, or the name of a bundled config.")
    parser.add_argument("--workers", type=int, default=4, help="Worker count of the second run.")
    parser.add_argument("--replicas", type=int, default=8, help="Replica count of every run.")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        results = [reproduce(args.config, s, args.workers, args.replicas, Path(tmp)) for s in args.subcommands]
    sys.exit(0 if all(results) else 1)


if __name__ == "__main__":
    main()
