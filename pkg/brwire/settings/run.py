"""Defines the run settings schema."""

from dataclasses import dataclass, field
from typing import Any

from omegaconf import MISSING


@dataclass
class SimulationSettings:
    n_generations: int = field(default=12)
    max_particles: int = field(default=2**23)
    replicas: int = field(default=1)
    seed: int = field(default=0)
    mode: str = field(default="quenched_xi")
    workers: int = field(default=1)
    keep_measures: str = field(default="last")
    decomposition_t: list[float] = field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])


@dataclass
class GridSettings:
    t_min: float = field(default=-4.0)
    t_max: float = field(default=4.0)
    t_points: int = field(default=81)
    x_min: float = field(default=-3.0)
    x_max: float = field(default=3.0)
    x_points: int = field(default=61)


@dataclass
class CltSettings:
    n_list: list[int] = field(default_factory=lambda: [10, 14, 18])
    x_min: float = field(default=-4.0)
    x_max: float = field(default=4.0)
    x_points: int = field(default=401)
    threshold: float = field(default=0.05)
    trend_seeds: int = field(default=5)


@dataclass
class MdpSettings:
    alpha: float = field(default=0.7)
    x: float = field(default=1.0)
    t: float = field(default=1.0)
    n_list: list[int] = field(default_factory=lambda: [14, 18, 22])
    threshold: float = field(default=0.2)
    tilt_threshold: float = field(default=0.1)


@dataclass
class FreeEnergySettings:
    n: int = field(default=20)
    t_values: list[float] = field(default_factory=lambda: [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
    inner_threshold: float = field(default=0.05)
    outer_threshold: float = field(default=0.15)


@dataclass
class LdpSettings:
    a: float = field(default=0.5)
    b: float = field(default=0.8)
    n_list: list[int] = field(default_factory=lambda: [10, 15, 20])
    epsilon: float = field(default=0.1)


@dataclass
class LpRateSettings:
    t: float = field(default=0.5)
    p: float = field(default=2.0)
    n: int = field(default=14)
    replicas: int = field(default=200)
    epsilon: float = field(default=0.1)
    mode: str = field(default="quenched_xi_and_Y")


@dataclass
class MartingaleSettings:
    t: float = field(default=1.0)
    n: int = field(default=10)
    replicas: int = field(default=500)
    se_multiplier: float = field(default=3.0)
    mode: str = field(default="quenched_xi_and_Y")


@dataclass
class DecompositionSettings:
    n: int = field(default=12)
    runs: int = field(default=20)
    threshold: float = field(default=1e-9)


@dataclass
class HarnessSettings:
    clt: CltSettings = field(default_factory=CltSettings)
    mdp: MdpSettings = field(default_factory=MdpSettings)
    free_energy: FreeEnergySettings = field(default_factory=FreeEnergySettings)
    ldp: LdpSettings = field(default_factory=LdpSettings)
    lp_rate: LpRateSettings = field(default_factory=LpRateSettings)
    martingale: MartingaleSettings = field(default_factory=MartingaleSettings)
    decomposition: DecompositionSettings = field(default_factory=DecompositionSettings)


@dataclass
class RunConfig:
    model: Any = field(default=MISSING)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    grid: GridSettings = field(default_factory=GridSettings)
    harness: HarnessSettings = field(default_factory=HarnessSettings)
    output_dir: str = field(default="runs")
