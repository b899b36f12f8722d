"""Pytest configuration file."""

from pathlib import Path

import numpy as np
import pytest
from _pytest.python import Function

from brwire.env_model import EnvModel
from brwire.settings import load_config


def pytest_collection_modifyitems(items: list[Function]) -> None:
    items.sort(key=lambda x: x.get_closest_marker("slow") is not None)


@pytest.fixture()
def base_model() -> EnvModel:
    return load_config("base").model


@pytest.fixture()
def immigration_model() -> EnvModel:
    return load_config("immigration").model


@pytest.fixture()
def markov_model() -> EnvModel:
    return load_config("markov").model


@pytest.fixture()
def two_state_model() -> EnvModel:
    return load_config("two_state").model


@pytest.fixture()
def noncentered_model() -> EnvModel:
    return load_config("noncentered").model


@pytest.fixture()
def mirrored_model() -> EnvModel:
    return load_config("mirrored").model


@pytest.fixture()
def small_grid() -> np.ndarray:
    return np.round(np.linspace(-2.0, 2.0, 9), 12)


@pytest.fixture()
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "run.yaml"
    path.write_text(
        "model:\n"
        "  kind: constant\n"
        "  states:\n"
        "    - offspring: {kind: fixed, m: 2}\n"
        "      displacement: {kind: gaussian, mean: 0.0, std: 1.0}\n"
        f"output_dir: {tmp_path / 'runs'}\n",
        encoding="utf-8",
    )
    return path
