"""Defines the run settings.

A run config is a YAML file merged onto the :class:`RunConfig` schema. Every
key outside the schema is rejected, except under ``model:``, which is handed
to the pydantic environment model for validation.
"""

import copy
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence, cast

import numpy as np
import yaml
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException
from pydantic import ValidationError

from brwire.env_model import EnvModel
from brwire.errors import ConfigError, ModelSchemaError
from brwire.settings.run import RunConfig
from brwire.simulator import SimConfig
from brwire.utils.hashing import config_hash

CONFIGS_DIR = (Path(__file__).parent / "configs").resolve()

# Keys that change where or how fast a run happens, but not its results.
UNHASHED_KEYS: tuple[tuple[str, ...], ...] = (("output_dir",), ("simulation", "workers"))


def _check_exists(path: Path) -> Path:
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return path


def resolve_config_path(path_or_name: str | Path) -> Path:
    """Resolves a file path, or the name of a bundled config such as ``base``."""
    path = Path(path_or_name)
    if path.exists():
        return path.resolve()
    if path.suffix == "" and path.parent == Path("."):
        return _check_exists(CONFIGS_DIR / f"{path}.yaml")
    return _check_exists(path)


def _omegaconf_error(e: OmegaConfBaseException) -> ConfigError:
    message = getattr(e, "msg", None) or str(e).splitlines()[0]
    key = getattr(e, "full_key", None) or None
    return ConfigError(message, key)


def hashed_subtree(container: dict[str, Any]) -> dict[str, Any]:
    """Returns a copy of the config tree without the keys in UNHASHED_KEYS."""
    tree = copy.deepcopy(container)
    for *parents, leaf in UNHASHED_KEYS:
        node = tree
        for key in parents:
            node = node.get(key, {})
        node.pop(leaf, None)
    return tree


def _load_settings(path: Path, overrides: Sequence[str] = ()) -> tuple[RunConfig, dict[str, Any]]:
    try:
        config = OmegaConf.load(path)
        config = OmegaConf.merge(OmegaConf.structured(RunConfig), config, OmegaConf.from_dotlist(list(overrides)))
        container = OmegaConf.to_container(config, resolve=True, throw_on_missing=True)
    except OmegaConfBaseException as e:
        raise _omegaconf_error(e) from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}") from e
    return cast(RunConfig, config), cast(dict[str, Any], container)


def parse_model(data: Any) -> EnvModel:  # noqa: ANN401
    """Validates the ``model:`` subtree.

    Raises:
        ModelSchemaError: With the dotted location of the first offending key.
    """
    try:
        return EnvModel.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(["model", *(str(part) for part in error["loc"])])
        raise ModelSchemaError(error["msg"], key) from e


def _grid(lo: float, hi: float, points: int, key: str) -> np.ndarray:
    if points < 2 or not lo < hi:
        raise ConfigError(f"needs at least two points on a non-empty range, got [{lo}, {hi}] x {points}", key)
    grid = np.round(np.linspace(lo, hi, points), 12)
    grid.setflags(write=False)
    return grid


@dataclass(frozen=True)
class LoadedConfig:
    settings: RunConfig
    model: EnvModel
    config_hash: str
    source: Path

    @property
    def t_grid(self) -> np.ndarray:
        grid = self.settings.grid
        return _grid(grid.t_min, grid.t_max, grid.t_points, "grid.t_points")

    @property
    def x_grid(self) -> np.ndarray:
        grid = self.settings.grid
        return _grid(grid.x_min, grid.x_max, grid.x_points, "grid.x_points")

    @property
    def output_dir(self) -> Path:
        return Path(self.settings.output_dir)

    def sim_config(self, **changes: Any) -> SimConfig:  # noqa: ANN401
        """Builds the simulation parameters, with optional per-verifier changes."""
        sim = self.settings.simulation
        base = SimConfig(
            n_generations=sim.n_generations,
            seed=sim.seed,
            max_particles=sim.max_particles,
            mode=sim.mode,  # type: ignore[arg-type]
            replicas=sim.replicas,
            workers=sim.workers,
            keep_measures=sim.keep_measures,  # type: ignore[arg-type]
            t_grid=self.t_grid,
            decomposition_t=tuple(float(t) for t in sim.decomposition_t),
        )
        return replace(base, **changes) if changes else base


def load_config(path_or_name: str | Path, overrides: Sequence[str] = ()) -> LoadedConfig:
    """Loads and validates a run config.

    Args:
        path_or_name: A YAML file, or the name of a bundled config.
        overrides: Dotted ``key=value`` overrides, applied last.

    Returns:
        The typed settings, the validated environment model and the config
        hash, which does not depend on key order, the output directory or
        the worker count.

    Raises:
        ConfigError: If the file is missing, malformed or has unknown keys.
    """
    path = resolve_config_path(path_or_name)
    settings, container = _load_settings(path, overrides)
    model = parse_model(container["model"])
    digest = config_hash(hashed_subtree(container))
    loaded = LoadedConfig(settings=settings, model=model, config_hash=digest, source=path)
    loaded.sim_config()
    return loaded
