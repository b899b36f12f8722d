"""Streams the branching random walk with immigration, one generation at a time.

Only the current generation is kept in memory. Particles are stored grouped
by the founder of their family: first the descendants of the initial
particle, then the descendants of each immigrant in order of arrival, then
the immigrants that just arrived. Children are laid out next to their
parents, so the grouping survives every step and per-founder sums reduce
over contiguous slices.

Randomness is split into named streams (see :mod:`brwire.utils.rng`):

- ``environment`` draws the state sequence,
- ``immigration`` draws every immigrant batch up front,
- ``branching/<replica>/root`` drives the initial particle's family,
- ``branching/<replica>/immigrant`` drives every immigrant family.

Because the root family has its own stream, the run without immigration
reproduces the root-tagged part of the full run exactly.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import numpy as np

from brwire.env_model import EnvModel, EnvState, sample_state_indices, validate
from brwire.errors import CapExceededError, ConfigError, ModelValidationError
from brwire.functionals import (
    CountingMeasure,
    QuenchedNormalizers,
    founder_log_laplace,
    log_laplace,
    log_laplace_grid,
)
from brwire.utils.rng import substream

logger = logging.getLogger(__name__)

SimMode = Literal["quenched_xi", "quenched_xi_and_Y", "annealed"]
KeepMeasures = Literal["all", "last", "none"]


def default_t_grid() -> np.ndarray:
    return np.round(np.linspace(-4.0, 4.0, 81), 12)


@dataclass(frozen=True)
class OriginTag:
    """The founding ancestor of a particle: the root, or immigrant i of generation k."""

    generation: int = 0
    index: int = 0

    @property
    def is_root(self) -> bool:
        return self.generation == 0


ROOT = OriginTag()


@dataclass(frozen=True)
class FounderTable:
    """All founders seen so far; row 0 is the initial particle, row j > 0 an immigrant."""

    generation: np.ndarray
    index: np.ndarray
    position: np.ndarray

    @classmethod
    def initial(cls) -> "FounderTable":
        return cls(
            generation=np.zeros(1, dtype=np.int64),
            index=np.zeros(1, dtype=np.int64),
            position=np.zeros(1),
        )

    def __len__(self) -> int:
        return int(self.generation.size)

    def extend(self, generation: int, positions: np.ndarray) -> "FounderTable":
        if positions.size == 0:
            return self
        return FounderTable(
            generation=np.concatenate([self.generation, np.full(positions.size, generation, dtype=np.int64)]),
            index=np.concatenate([self.index, np.arange(1, positions.size + 1, dtype=np.int64)]),
            position=np.concatenate([self.position, positions]),
        )

    def tag(self, founder_id: int) -> OriginTag:
        return OriginTag(generation=int(self.generation[founder_id]), index=int(self.index[founder_id]))


@dataclass(frozen=True)
class Generation:
    index: int
    positions: np.ndarray
    founder_ids: np.ndarray
    founders: FounderTable

    @classmethod
    def initial(cls) -> "Generation":
        return cls(
            index=0,
            positions=np.zeros(1),
            founder_ids=np.zeros(1, dtype=np.int64),
            founders=FounderTable.initial(),
        )

    def __len__(self) -> int:
        return int(self.positions.size)

    @property
    def n_root(self) -> int:
        return int(np.searchsorted(self.founder_ids, 0, side="right"))

    def tag(self, particle: int) -> OriginTag:
        return self.founders.tag(int(self.founder_ids[particle]))

    def measure(self) -> CountingMeasure:
        return CountingMeasure.from_positions(self.positions)

    def root_measure(self) -> CountingMeasure:
        return CountingMeasure.from_positions(self.positions[: self.n_root])


@dataclass(frozen=True)
class ImmigrationRealization:
    """The immigrant counts V_k and absolute positions; batch k joins generation k + 1."""

    counts: np.ndarray
    positions: tuple[np.ndarray, ...]

    def batch(self, k: int) -> np.ndarray:
        return self.positions[k]

    def __len__(self) -> int:
        return len(self.positions)


def sample_immigration(environment: Sequence[EnvState], rng: np.random.Generator) -> ImmigrationRealization:
    positions = []
    for state in environment:
        count = state.immigration.count.sample(rng)
        batch = state.immigration.position.sample(rng, count) if count > 0 else np.zeros(0)
        batch.setflags(write=False)
        positions.append(batch)
    counts = np.array([p.size for p in positions], dtype=np.int64)
    return ImmigrationRealization(counts=counts, positions=tuple(positions))


class LineageRngs(NamedTuple):
    root: np.random.Generator
    immigrant: np.random.Generator


@dataclass(frozen=True)
class SimConfig:
    n_generations: int
    seed: int = 0
    max_particles: int = 2**23
    mode: SimMode = "quenched_xi"
    replicas: int = 1
    workers: int = 1
    keep_measures: KeepMeasures = "last"
    t_grid: np.ndarray = field(default_factory=default_t_grid)
    decomposition_t: tuple[float, ...] = (-2.0, -1.0, 0.0, 1.0, 2.0)

    def __post_init__(self) -> None:
        if self.n_generations < 1:
            raise ConfigError(f"must be at least 1, got {self.n_generations}", "simulation.n_generations")
        if self.max_particles < 1:
            raise ConfigError(f"must be at least 1, got {self.max_particles}", "simulation.max_particles")
        if self.replicas < 1:
            raise ConfigError(f"must be at least 1, got {self.replicas}", "simulation.replicas")
        if self.workers < 1:
            raise ConfigError(f"must be at least 1, got {self.workers}", "simulation.workers")
        if self.seed < 0:
            raise ConfigError(f"must be non-negative, got {self.seed}", "simulation.seed")
        if self.mode not in ("quenched_xi", "quenched_xi_and_Y", "annealed"):
            raise ConfigError(f"unknown mode {self.mode!r}", "simulation.mode")
        if self.keep_measures not in ("all", "last", "none"):
            raise ConfigError(f"unknown value {self.keep_measures!r}", "simulation.keep_measures")


@dataclass(frozen=True)
class GenerationSummary:
    """What is kept of generation n once the next one has been produced.

    The Laplace transform is split into three disjoint parts: the root's
    family, the immigrants that just arrived, and the families of older
    immigrants. The total is their log-sum, so it dominates each part
    exactly, not just up to rounding.
    """

    index: int
    total: int
    root_total: int
    rightmost: float
    log_laplace_root: np.ndarray
    log_laplace_fresh: np.ndarray
    log_laplace_older: np.ndarray
    decomposition_log_laplace: np.ndarray
    founder_log_laplace: np.ndarray
    founders: FounderTable

    @property
    def log_laplace(self) -> np.ndarray:
        return np.logaddexp(self.log_laplace_root, np.logaddexp(self.log_laplace_older, self.log_laplace_fresh))

    @property
    def log_laplace_immigrant(self) -> np.ndarray:
        return np.logaddexp(self.log_laplace_older, self.log_laplace_fresh)


def summarize(
    gen: Generation,
    t_grid: np.ndarray,
    decomposition_t: Sequence[float],
    fresh: np.ndarray | None = None,
) -> GenerationSummary:
    """Evaluates the per-generation functionals before the generation is discarded.

    Args:
        gen: The generation to summarize.
        t_grid: The grid for the Laplace transforms.
        decomposition_t: The t-values at which founder families are tracked.
        fresh: The immigrant batch that joined this generation, in the order
            it was appended; defaults to none.
    """
    n_root = gen.n_root
    n_fresh = 0 if fresh is None else fresh.size
    older = gen.positions[n_root : len(gen) - n_fresh]
    fresh_positions = np.zeros(0) if fresh is None else fresh
    decomposition = np.array(
        [
            founder_log_laplace(gen.positions, gen.founder_ids, gen.founders.position, float(t))
            for t in decomposition_t
        ]
    ).reshape(len(decomposition_t), len(gen.founders))
    return GenerationSummary(
        index=gen.index,
        total=len(gen),
        root_total=n_root,
        rightmost=float(np.max(gen.positions)),
        log_laplace_root=log_laplace_grid(gen.positions[:n_root], t_grid),
        log_laplace_fresh=log_laplace_grid(fresh_positions, t_grid),
        log_laplace_older=log_laplace_grid(older, t_grid),
        decomposition_log_laplace=np.array([log_laplace(gen.positions, float(t)) for t in decomposition_t]),
        founder_log_laplace=decomposition.T.copy(),
        founders=gen.founders,
    )


def step(
    gen: Generation,
    state: EnvState,
    immigrants: np.ndarray,
    rngs: LineageRngs,
    max_particles: int,
) -> Generation:
    """Produces generation n + 1 from generation n.

    Every particle is replaced by its children, placed at the parent's
    position plus i.i.d. displacements; the immigrants of this step are
    appended at their absolute positions as new founders.

    Args:
        gen: Generation n.
        state: The environment state xi_n.
        immigrants: Positions of the V_n immigrants joining generation n + 1.
        rngs: The root-family and immigrant-family branching streams.
        max_particles: The population cap.

    Returns:
        Generation n + 1.

    Raises:
        CapExceededError: If generation n + 1 would exceed the cap.
    """
    n_root = gen.n_root
    root_counts = state.offspring.sample(rngs.root, n_root)
    other_counts = state.offspring.sample(rngs.immigrant, len(gen) - n_root)
    n_root_children = int(root_counts.sum())
    n_other_children = int(other_counts.sum())
    requested = n_root_children + n_other_children + immigrants.size
    if requested > max_particles:
        raise CapExceededError(gen.index + 1, requested, max_particles)

    root_children = np.repeat(gen.positions[:n_root], root_counts)
    root_children += state.displacement.sample(rngs.root, n_root_children)
    other_children = np.repeat(gen.positions[n_root:], other_counts)
    other_children += state.displacement.sample(rngs.immigrant, n_other_children)

    founders = gen.founders.extend(gen.index + 1, immigrants)
    fresh_ids = np.arange(len(gen.founders), len(founders), dtype=np.int64)
    founder_ids = np.concatenate(
        [
            np.zeros(n_root_children, dtype=np.int64),
            np.repeat(gen.founder_ids[n_root:], other_counts),
            fresh_ids,
        ]
    )
    positions = np.concatenate([root_children, other_children, immigrants])
    return Generation(index=gen.index + 1, positions=positions, founder_ids=founder_ids, founders=founders)


@dataclass(frozen=True)
class Trajectory:
    summaries: tuple[GenerationSummary, ...]
    state_indices: np.ndarray
    immigration: ImmigrationRealization
    normalizers: QuenchedNormalizers
    measures: dict[int, CountingMeasure]
    t_grid: np.ndarray
    decomposition_t: np.ndarray
    seed: int
    replica: int
    mode: SimMode

    @property
    def n_generations(self) -> int:
        return len(self.summaries) - 1

    @property
    def environment(self) -> tuple[EnvState, ...]:
        return self.normalizers.environment

    @property
    def totals(self) -> np.ndarray:
        return np.array([s.total for s in self.summaries], dtype=np.int64)

    @property
    def root_totals(self) -> np.ndarray:
        return np.array([s.root_total for s in self.summaries], dtype=np.int64)

    def measure(self, n: int) -> CountingMeasure:
        if n not in self.measures:
            raise KeyError(f"Generation {n} was not retained; simulate with keep_measures='all'")
        return self.measures[n]


def _streams(sim: SimConfig, replica: int) -> tuple[np.random.Generator, np.random.Generator, LineageRngs]:
    shared_env = sim.mode != "annealed"
    shared_immigration = sim.mode == "quenched_xi_and_Y"
    env_rng = substream(sim.seed, "environment") if shared_env else substream(sim.seed, "environment", replica)
    immigration_rng = (
        substream(sim.seed, "immigration") if shared_immigration else substream(sim.seed, "immigration", replica)
    )
    lineage = LineageRngs(
        root=substream(sim.seed, "branching", replica, "root"),
        immigrant=substream(sim.seed, "branching", replica, "immigrant"),
    )
    return env_rng, immigration_rng, lineage


def simulate(model: EnvModel, sim: SimConfig, replica: int = 0) -> Trajectory:
    """Simulates one replica of the process for ``sim.n_generations`` steps.

    Args:
        model: The environment model; it must pass :func:`validate`, up to
            warnings for non-centered states.
        sim: The simulation parameters.
        replica: The replica index, which selects the branching streams (and
            the environment and immigration streams, depending on the mode).

    Returns:
        The per-generation summaries together with the environment and
        immigration realizations that produced them.
    """
    report = validate(model, sim.t_grid)
    if not report.passed:
        raise ModelValidationError("; ".join(c.message for c in report.failures))

    env_rng, immigration_rng, lineage = _streams(sim, replica)
    state_indices = sample_state_indices(model, sim.n_generations, env_rng)
    environment = tuple(model.states[i] for i in state_indices)
    immigration = sample_immigration(environment, immigration_rng)
    normalizers = QuenchedNormalizers.build(environment, sim.t_grid)

    gen = Generation.initial()
    summaries = [summarize(gen, sim.t_grid, sim.decomposition_t)]
    measures: dict[int, CountingMeasure] = {}
    if sim.keep_measures == "all":
        measures[0] = gen.measure()

    for k in range(sim.n_generations):
        gen = step(gen, environment[k], immigration.batch(k), lineage, sim.max_particles)
        logger.debug("Replica %d generation %d holds %d particles", replica, gen.index, len(gen))
        summaries.append(summarize(gen, sim.t_grid, sim.decomposition_t, fresh=immigration.batch(k)))
        if sim.keep_measures == "all" or (sim.keep_measures == "last" and k == sim.n_generations - 1):
            measures[gen.index] = gen.measure()

    return Trajectory(
        summaries=tuple(summaries),
        state_indices=state_indices,
        immigration=immigration,
        normalizers=normalizers,
        measures=measures,
        t_grid=np.asarray(sim.t_grid, dtype=float),
        decomposition_t=np.asarray(sim.decomposition_t, dtype=float),
        seed=sim.seed,
        replica=replica,
        mode=sim.mode,
    )


def simulate_no_immigration(model: EnvModel, sim: SimConfig, replica: int = 0) -> Trajectory:
    """Simulates the same process with every immigration law replaced by zero.

    The environment and root-family streams are those of :func:`simulate`, so
    the result equals the root-tagged part of the full run.
    """
    return simulate(model.without_immigration(), sim, replica)


def _simulate_replica(args: tuple[EnvModel, SimConfig, int]) -> Trajectory:
    model, sim, replica = args
    return simulate(model, sim, replica)


def simulate_replicas(model: EnvModel, sim: SimConfig) -> list[Trajectory]:
    """Simulates ``sim.replicas`` replicas, in parallel when ``sim.workers > 1``.

    Results are returned in replica order and do not depend on the number of
    workers.
    """
    jobs = [(model, sim, replica) for replica in range(sim.replicas)]
    logger.info("Simulating %d replicas of %d generations (%s)", sim.replicas, sim.n_generations, sim.mode)
    if sim.workers == 1 or sim.replicas == 1:
        return [_simulate_replica(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=sim.workers) as pool:
        return list(pool.map(_simulate_replica, jobs, chunksize=max(1, sim.replicas // (4 * sim.workers))))
