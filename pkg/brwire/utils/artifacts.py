"""Writers for the CSV and JSON artifacts produced by runs."""

import csv
import json
import logging
import math
import platform
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import scipy

from brwire import __version__

logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """Formats a float with 17 significant digits.

    Raises:
        ValueError: If the value is NaN.
    """
    value = float(value)
    if math.isnan(value):
        raise ValueError("NaN values are never written to artifacts")
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _format_cell(value: Any) -> str:  # noqa: ANN401
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def encode_sentinels(data: Any) -> Any:  # noqa: ANN401
    """Replaces infinities with the strings "inf" and "-inf", recursively.

    Raises:
        ValueError: If a NaN is found anywhere in the tree.
    """
    if isinstance(data, Mapping):
        return {str(k): encode_sentinels(v) for k, v in data.items()}
    if isinstance(data, np.ndarray):
        return [encode_sentinels(v) for v in data.tolist()]
    if isinstance(data, (list, tuple)):
        return [encode_sentinels(v) for v in data]
    if isinstance(data, (bool, np.bool_)):
        return bool(data)
    if isinstance(data, (int, np.integer)):
        return int(data)
    if isinstance(data, (float, np.floating)):
        value = float(data)
        if math.isnan(value):
            raise ValueError("NaN values are never written to artifacts")
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return data


def write_csv(path: Path, fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_format_cell(row.get(name)) for name in fieldnames])
    logger.info("Wrote %s", path)
    return path


def write_json(path: Path, data: Any) -> Path:  # noqa: ANN401
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(encode_sentinels(data), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logger.info("Wrote %s", path)
    return path


def software_versions() -> dict[str, str]:
    return {
        "brwire": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }
