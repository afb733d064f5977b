"""Training drivers, run logs, checkpoints and archive persistence.

Both optimizers log one row per generation and maintain an elite
archive: cma-me inserts drive the search, while plain cma-es records
every valid candidate passively without letting the archive influence
selection. Candidate evaluation can fan out over processes; results are
re-associated by index so parallel runs stay deterministic.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from ncrs import cmaes
from ncrs.channels import Task, genome_length
from ncrs.config import RunConfig
from ncrs.env import evaluate_genome
from ncrs.genome_io import read_genome, write_genome
from ncrs.qd import (
    Archive,
    EmitterState,
    FeatureDescriptor,
    InsertKind,
    InsertOutcome,
    archive_insert,
    emitter_tell,
    maybe_restart,
    qd_metrics,
    total_configurations,
)

LOG_COLUMNS = (
    "generation",
    "evaluations",
    "best_fitness",
    "mean_fitness",
    "sigma",
    "archive_size",
    "qd_score",
    "cells_filled_pct",
    "wall_time_s",
)

CHECKPOINT_VERSION = 1


@dataclass
class TrainSetup:
    """Optimizer-level knobs, independent of what is being evaluated."""

    dimension: int
    generations: int
    population: int
    sigma0: float = 0.01
    seed: int = 0
    n_emitters: int = 1
    total_configurations: int = total_configurations(25)
    mean0: np.ndarray | None = None


@dataclass
class TrainerState:
    """Everything a run needs to continue: optimizer(s), archive, counters."""

    kind: str  # "cma-es" | "cma-me"
    setup: TrainSetup
    archive: Archive
    emitters: list[EmitterState]
    restart_rng: np.random.Generator
    generation: int = 0
    evaluations: int = 0
    best_fitness: float = -np.inf
    best_genome: np.ndarray | None = None
    log_rows: list[tuple] = field(default_factory=list)


def init_trainer(kind: str, setup: TrainSetup) -> TrainerState:
    if kind not in ("cma-es", "cma-me"):
        raise ValueError(f"unknown optimizer {kind!r}")
    n_emitters = setup.n_emitters if kind == "cma-me" else 1
    seeds = np.random.SeedSequence(setup.seed).generate_state(n_emitters + 1, dtype=np.uint64)
    emitters = [
        EmitterState(
            inner=cmaes.cma_init(
                cmaes.CmaConfig(
                    dimension=setup.dimension,
                    population=setup.population,
                    sigma0=setup.sigma0,
                    mean0=setup.mean0,
                    seed=int(seeds[i]),
                )
            ),
            id=i,
        )
        for i in range(n_emitters)
    ]
    return TrainerState(
        kind=kind,
        setup=setup,
        archive=Archive(total_configurations=setup.total_configurations),
        emitters=emitters,
        restart_rng=np.random.default_rng(int(seeds[-1])),
    )


def _evaluate_population(genomes: np.ndarray, evaluate, pool) -> list:
    if pool is None:
        return [evaluate(g) for g in genomes]
    return list(pool.map(evaluate, list(genomes)))


def train_step(state: TrainerState, evaluate, pool=None) -> None:
    """One generation: one emitter's ask/evaluate/tell (round-robin)."""
    started = time.perf_counter()
    emitter = state.emitters[state.generation % len(state.emitters)]
    genomes = cmaes.ask(emitter.inner)
    reports = _evaluate_population(genomes, evaluate, pool)
    fitnesses = np.array([r.fitness for r in reports])

    outcomes: list[InsertOutcome] = []
    for genome, report in zip(genomes, reports):
        if report.features is None:
            outcomes.append(InsertOutcome(InsertKind.REJECTED))
        else:
            outcomes.append(
                archive_insert(
                    state.archive,
                    genome,
                    report.fitness,
                    FeatureDescriptor(*report.features),
                    generation=state.generation,
                )
            )

    if state.kind == "cma-me":
        emitter_tell(emitter, genomes, fitnesses, outcomes)
        maybe_restart(emitter, state.archive, len(state.emitters), state.restart_rng)
    else:
        cmaes.tell(emitter.inner, genomes, fitnesses)

    gen_best = int(np.argmax(fitnesses))
    if fitnesses[gen_best] > state.best_fitness:
        state.best_fitness = float(fitnesses[gen_best])
        state.best_genome = np.array(genomes[gen_best])

    state.generation += 1
    state.evaluations += len(genomes)
    filled, score = qd_metrics(state.archive)
    state.log_rows.append(
        (
            state.generation,
            state.evaluations,
            state.best_fitness,
            float(fitnesses.mean()),
            emitter.inner.sigma,
            len(state.archive),
            score,
            filled,
            time.perf_counter() - started,
        )
    )


def run_training(state: TrainerState, evaluate, jobs: int = 1,
                 on_generation=None) -> TrainerState:
    """Advance until the generation budget, optionally in parallel."""
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while state.generation < state.setup.generations:
            train_step(state, evaluate, pool)
            if on_generation is not None:
                on_generation(state)
    finally:
        if pool is not None:
            pool.shutdown()
    return state


def make_evaluator(task: Task, master_seed: int, n_episodes: int = 12,
                   episode_steps: int = 100, physics=None, dims=(5, 5)):
    """Picklable genome -> FitnessReport callable with a fixed battery."""
    return partial(
        evaluate_genome,
        task=task,
        master_seed=master_seed,
        n_episodes=n_episodes,
        episode_steps=episode_steps,
        physics=physics,
        dims=dims,
    )


def write_log_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- checkpoints ------------------------------------------------------------


def save_checkpoint(path, state: TrainerState) -> None:
    arrays: dict[str, np.ndarray] = {}
    meta = {
        "version": CHECKPOINT_VERSION,
        "kind": state.kind,
        "generation": state.generation,
        "evaluations": state.evaluations,
        "best_fitness": state.best_fitness,
        "n_emitters": len(state.emitters),
        "stuck": [e.stuck_counter for e in state.emitters],
        "setup": {
            "dimension": state.setup.dimension,
            "generations": state.setup.generations,
            "population": state.setup.population,
            "sigma0": state.setup.sigma0,
            "seed": state.setup.seed,
            "n_emitters": state.setup.n_emitters,
            "total_configurations": state.setup.total_configurations,
        },
        "restart_rng": state.restart_rng.bit_generator.state,
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    if state.best_genome is not None:
        arrays["best_genome"] = state.best_genome
    for i, emitter in enumerate(state.emitters):
        for key, value in cmaes.state_to_arrays(emitter.inner).items():
            arrays[f"emitter{i}_{key}"] = value
    keys = state.archive.sorted_keys()
    arrays["archive_keys"] = np.array(keys, dtype=np.int64).reshape(len(keys), 3)
    arrays["archive_fitness"] = np.array([state.archive.cells[k].fitness for k in keys])
    arrays["archive_generation"] = np.array(
        [state.archive.cells[k].generation for k in keys], dtype=np.int64
    )
    arrays["archive_genomes"] = (
        np.stack([state.archive.cells[k].genome for k in keys])
        if keys
        else np.zeros((0, state.setup.dimension))
    )
    np.savez_compressed(path, **arrays)


def load_checkpoint(path) -> TrainerState:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {meta['version']}")
        setup = TrainSetup(**meta["setup"])
        state = init_trainer(meta["kind"], setup)
        state.generation = meta["generation"]
        state.evaluations = meta["evaluations"]
        state.best_fitness = meta["best_fitness"]
        if "best_genome" in data:
            state.best_genome = np.array(data["best_genome"])
        for i, emitter in enumerate(state.emitters):
            emitter.inner = cmaes.state_from_arrays(
                {
                    key[len(f"emitter{i}_") :]: data[key]
                    for key in data.files
                    if key.startswith(f"emitter{i}_")
                }
            )
            emitter.stuck_counter = meta["stuck"][i]
        state.restart_rng.bit_generator.state = meta["restart_rng"]
        for key, fitness, generation, genome in zip(
            data["archive_keys"],
            data["archive_fitness"],
            data["archive_generation"],
            data["archive_genomes"],
        ):
            archive_insert(
                state.archive,
                genome,
                float(fitness),
                tuple(int(v) for v in key),
                generation=int(generation),
            )
    return state


# -- archive directory export ----------------------------------------------


def save_archive_dir(archive: Archive, out_dir, task: Task, dims=(5, 5)) -> None:
    """Index CSV plus one genome file per elite."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "index.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sensors", "actuators", "body_parts", "fitness", "generation", "genome_file"])
        for key in archive.sorted_keys():
            elite = archive.cells[key]
            name = f"elite_s{key[0]}_a{key[1]}_b{key[2]}.ncrs"
            write_genome(out / name, elite.genome, task, dims)
            writer.writerow([key[0], key[1], key[2], repr(elite.fitness), elite.generation, name])


def load_archive_dir(archive_dir, total: int) -> Archive:
    path = Path(archive_dir)
    archive = Archive(total_configurations=total)
    with open(path / "index.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            genome = read_genome(path / row["genome_file"]).genome
            archive_insert(
                archive,
                genome,
                float(row["fitness"]),
                (int(row["sensors"]), int(row["actuators"]), int(row["body_parts"])),
                generation=int(row["generation"]),
            )
    return archive


# -- harness-level entry points ---------------------------------------------


@dataclass
class RunArtifacts:
    state: TrainerState
    log_path: Path
    best_path: Path | None
    checkpoint_path: Path
    archive_dir: Path


def train_from_config(config: RunConfig, resume=None, progress=None) -> RunArtifacts:
    """cmd_train engine: run (or resume) and leave artifacts in out_dir."""
    task = config.resolved_task()
    dims = (config.grid_height, config.grid_width)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if resume is not None:
        state = load_checkpoint(resume)
        if state.setup.generations < config.resolved_generations():
            state.setup.generations = config.resolved_generations()
    else:
        setup = TrainSetup(
            dimension=genome_length(task.layout()),
            generations=config.resolved_generations(),
            population=config.resolved_population(),
            sigma0=config.sigma0,
            seed=config.seed,
            n_emitters=config.emitters,
            total_configurations=total_configurations(config.resolved_archive_area()),
        )
        state = init_trainer(config.optimizer, setup)

    evaluate = make_evaluator(
        task,
        master_seed=config.seed,
        n_episodes=config.train_episodes,
        episode_steps=config.episode_steps,
        physics=config.physics(),
        dims=dims,
    )
    run_training(state, evaluate, jobs=config.jobs, on_generation=progress)

    log_path = out / "log.csv"
    write_log_csv(log_path, state.log_rows)
    best_path = None
    if state.best_genome is not None:
        best_path = out / "best.ncrs"
        write_genome(best_path, state.best_genome, task, dims)
    checkpoint_path = out / "checkpoint.npz"
    save_checkpoint(checkpoint_path, state)
    archive_dir = out / "archive"
    save_archive_dir(state.archive, archive_dir, task, dims)
    (out / "config.txt").write_text(_config_echo(config))
    return RunArtifacts(state, log_path, best_path, checkpoint_path, archive_dir)


def _config_echo(config: RunConfig) -> str:
    from ncrs.config import serialize_config

    return serialize_config(config)


# -- random-genome baseline ---------------------------------------------------


@dataclass
class BaselineStats:
    n_genomes: int
    mean_fitness: float
    std_fitness: float
    max_fitness: float
    valid_rate: float
    fitnesses: np.ndarray


def random_genome_baseline(
    task: Task,
    n_genomes: int,
    seed: int,
    sigma: float = 0.01,
    n_episodes: int = 12,
    episode_steps: int = 100,
    physics=None,
    dims=(5, 5),
    jobs: int = 1,
) -> BaselineStats:
    """Evaluate n_genomes draws of N(0, sigma^2) on the same battery
    that training uses, for a did-we-learn-anything yardstick."""
    if n_genomes < 1:
        raise ValueError("n_genomes must be >= 1")
    task = Task.parse(task) if isinstance(task, str) else task
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xBA5E)))
    dim = genome_length(task.layout())
    genomes = rng.normal(0.0, sigma, size=(n_genomes, dim))
    evaluate = make_evaluator(task, seed, n_episodes, episode_steps, physics, dims)
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        reports = _evaluate_population(genomes, evaluate, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    fitnesses = np.array([r.fitness for r in reports])
    valid = np.array([r.valid for r in reports])
    return BaselineStats(
        n_genomes=n_genomes,
        mean_fitness=float(fitnesses.mean()),
        std_fitness=float(fitnesses.std()),
        max_fitness=float(fitnesses.max()),
        valid_rate=float(valid.mean()),
        fitnesses=fitnesses,
    )
