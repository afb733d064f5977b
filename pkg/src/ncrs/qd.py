"""MAP-Elites archive and the improvement emitters that feed it.

The archive keys robot designs by (sensors, actuators, body parts) and
keeps the best genome per key. Emitters are CMA-ES instances ranked by
archive improvement instead of raw fitness: filling an empty cell beats
improving an occupied one beats being rejected. An emitter stuck past
the patience threshold restarts from a random elite, but only while
elites outnumber emitters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ncrs.channels import Task
from ncrs.cmaes import CmaConfig, CmaState, cma_init, tell
from ncrs.morphology import Morphology, validate

STUCK_PATIENCE = 500  # restarts require stuck_counter strictly above this


@dataclass(frozen=True)
class FeatureDescriptor:
    sensors: int
    actuators: int
    body_parts: int

    def key(self) -> tuple[int, int, int]:
        return (self.sensors, self.actuators, self.body_parts)


def describe(morph: Morphology, task: Task | None = None) -> FeatureDescriptor | None:
    """Descriptor of a runnable design; None marks "do not archive".

    Passing the task applies its validity gate, so invalid designs
    produce no descriptor. Without a task only emptiness is checked.
    """
    if len(morph) == 0:
        return None
    if task is not None and not validate(morph, task).valid:
        return None
    return FeatureDescriptor(
        sensors=morph.sensors_light + morph.sensors_target,
        actuators=morph.wheels,
        body_parts=len(morph),
    )


def total_configurations(grid_area: int = 25) -> int:
    """Number of feasible (sensors, actuators, body_parts) triples.

    Feasible means body_parts in [1, grid_area] and sensors + actuators
    <= body_parts; closed form sum of (b+1)(b+2)/2.
    """
    return sum((b + 1) * (b + 2) // 2 for b in range(1, grid_area + 1))


@dataclass
class Elite:
    genome: np.ndarray
    fitness: float
    descriptor: tuple[int, int, int]
    generation: int


class InsertKind(Enum):
    NEW_CELL = "new"
    IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass(frozen=True)
class InsertOutcome:
    kind: InsertKind
    delta: float = 0.0


@dataclass
class Archive:
    total_configurations: int
    cells: dict[tuple[int, int, int], Elite] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def best(self) -> Elite | None:
        if not self.cells:
            return None
        return max(self.cells.values(), key=lambda e: e.fitness)

    def sorted_keys(self) -> list[tuple[int, int, int]]:
        return sorted(self.cells)


def archive_insert(
    archive: Archive,
    genome: np.ndarray,
    fitness: float,
    descriptor: FeatureDescriptor | tuple[int, int, int],
    generation: int = 0,
) -> InsertOutcome:
    """Keep the strictly best genome per cell; ties reject."""
    key = descriptor.key() if isinstance(descriptor, FeatureDescriptor) else tuple(descriptor)
    incumbent = archive.cells.get(key)
    if incumbent is None:
        archive.cells[key] = Elite(np.array(genome, dtype=np.float64), fitness, key, generation)
        return InsertOutcome(InsertKind.NEW_CELL)
    if fitness > incumbent.fitness:
        delta = fitness - incumbent.fitness
        archive.cells[key] = Elite(np.array(genome, dtype=np.float64), fitness, key, generation)
        return InsertOutcome(InsertKind.IMPROVED, delta)
    return InsertOutcome(InsertKind.REJECTED)


def qd_metrics(archive: Archive) -> tuple[float, float]:
    """(cells filled %, QD-score): both normalized by the configuration count."""
    total = archive.total_configurations
    filled = len(archive) / total * 100.0
    score = sum(e.fitness for e in archive.cells.values()) / total
    return filled, score


@dataclass
class EmitterState:
    inner: CmaState
    id: int
    stuck_counter: int = 0


def improvement_ranking(fitnesses, outcomes: list[InsertOutcome]) -> list[int]:
    """Candidate indices, best first: new cells (by fitness), then
    improvements (by gain), then everything else (by fitness, which puts
    invalid designs' slot credit at the bottom). Ties keep ask order."""

    def band(i: int) -> tuple:
        out = outcomes[i]
        if out.kind is InsertKind.NEW_CELL:
            return (0, -fitnesses[i])
        if out.kind is InsertKind.IMPROVED:
            return (1, -out.delta)
        return (2, -fitnesses[i])

    return sorted(range(len(outcomes)), key=band)


def emitter_tell(
    emitter: EmitterState,
    genomes: np.ndarray,
    fitnesses: np.ndarray,
    outcomes: list[InsertOutcome],
) -> EmitterState:
    """Feed improvement-ranked candidates to the inner optimizer.

    The inner tell sees rank scores, not raw fitness.
    """
    lam = len(outcomes)
    if not (len(genomes) == len(fitnesses) == lam):
        raise ValueError("genomes, fitnesses and outcomes must align")

    order = improvement_ranking(fitnesses, outcomes)
    rank_scores = np.empty(lam)
    rank_scores[order] = np.arange(lam, 0.0, -1.0)
    tell(emitter.inner, genomes, rank_scores)

    if any(o.kind is not InsertKind.REJECTED for o in outcomes):
        emitter.stuck_counter = 0
    else:
        emitter.stuck_counter += 1
    return emitter


def maybe_restart(
    emitter: EmitterState,
    archive: Archive,
    n_emitters: int,
    rng: np.random.Generator,
) -> EmitterState:
    """Restart a stuck emitter from a random elite's genome.

    Fires only when elites strictly outnumber emitters and the emitter
    has been stuck for strictly more than the patience threshold.
    """
    if len(archive) <= n_emitters or emitter.stuck_counter <= STUCK_PATIENCE:
        return emitter
    keys = archive.sorted_keys()
    choice = keys[int(rng.integers(len(keys)))]
    elite = archive.cells[choice]
    old = emitter.inner.config
    config = CmaConfig(
        dimension=old.dimension,
        population=old.population,
        sigma0=old.sigma0,
        seed=int(rng.integers(2**63)),
    )
    fresh = cma_init(config)
    fresh.mean = np.array(elite.genome, dtype=np.float64)
    emitter.inner = fresh
    emitter.stuck_counter = 0
    return emitter
