"""Command-line surface: train, evaluate, render, baseline, archive-stats.

Exit codes: 0 success, 1 usage errors, 2 data or config errors.
NCRS_JOBS sets the default for --jobs.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from ncrs.backend import backend_name
from ncrs.channels import Task, genome_length
from ncrs.config import ConfigError, RunConfig, load_config, serialize_config
from ncrs.env import episode_seeds, evaluate_genome, make_episode
from ncrs.genome_io import GenomeFileError, read_genome
from ncrs.qd import qd_metrics, total_configurations
from ncrs.render import render_episode
from ncrs.train import (
    load_archive_dir,
    random_genome_baseline,
    train_from_config,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise UsageError(message)


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("NCRS_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> _Parser:
    parser = _Parser(prog="ncrs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run an optimizer and save artifacts")
    train.add_argument("--config", help="flat key=value config file")
    train.add_argument("--task", choices=["lc", "lco", "cbt"])
    train.add_argument("--optimizer", choices=["cma-es", "cma-me"])
    train.add_argument("--generations", type=int)
    train.add_argument("--lambda", dest="population", type=int, help="population per ask")
    train.add_argument("--emitters", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--episodes", dest="train_episodes", type=int)
    train.add_argument("--episode-steps", dest="episode_steps", type=int)
    train.add_argument("--jobs", type=int, default=None)
    train.add_argument("--out", dest="out_dir")
    train.add_argument("--resume", help="checkpoint.npz to continue from")
    train.add_argument("--quiet", action="store_true")

    evaluate = sub.add_parser("evaluate", help="test a saved genome on fresh episodes")
    evaluate.add_argument("genome_file")
    evaluate.add_argument("--task", choices=["lc", "lco", "cbt"],
                          help="must match the genome file header")
    evaluate.add_argument("--episodes", type=int, default=100)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--episode-steps", type=int, default=100)
    evaluate.add_argument("--out", help="also write the report to this file")

    render = sub.add_parser("render", help="frames + channel strips for one episode")
    render.add_argument("genome_file")
    render.add_argument("--seed", type=int, default=0)
    render.add_argument("--region", type=int, default=0, choices=range(4))
    render.add_argument("--episode-steps", type=int, default=100)
    render.add_argument("--out", dest="out_dir", required=True)

    baseline = sub.add_parser("baseline", help="random-genome fitness yardstick")
    baseline.add_argument("--task", choices=["lc", "lco", "cbt"], required=True)
    baseline.add_argument("--genomes", type=int, default=1000)
    baseline.add_argument("--seed", type=int, default=0)
    baseline.add_argument("--episodes", type=int, default=12)
    baseline.add_argument("--jobs", type=int, default=None)
    baseline.add_argument("--out", help="also write the stats to this file")

    stats = sub.add_parser("archive-stats", help="summarize a saved elite archive")
    stats.add_argument("archive_dir")
    stats.add_argument("--grid-area", type=int, default=25,
                       help="grid cells used for the configuration count")
    return parser


def _merged_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for name in (
        "task",
        "optimizer",
        "generations",
        "population",
        "emitters",
        "seed",
        "train_episodes",
        "episode_steps",
        "jobs",
        "out_dir",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if "jobs" not in overrides and not args.config:
        overrides["jobs"] = _default_jobs()
    config = replace(config, **overrides)
    config.validate()
    return config


def cmd_train(args) -> int:
    config = _merged_config(args)

    def progress(state):
        if args.quiet:
            return
        row = state.log_rows[-1]
        print(
            f"gen {row[0]:6d}  evals {row[1]:8d}  best {row[2]:.5f}  "
            f"mean {row[3]:.5f}  archive {row[5]:5d}",
            flush=True,
        )

    artifacts = train_from_config(config, resume=args.resume, progress=progress)
    print(f"backend: {backend_name()}")
    print(f"log: {artifacts.log_path}")
    print(f"checkpoint: {artifacts.checkpoint_path}")
    print(f"archive: {artifacts.archive_dir}")
    if artifacts.best_path is not None:
        print(f"best genome: {artifacts.best_path} (fitness {artifacts.state.best_fitness:.5f})")
    return 0


def cmd_evaluate(args) -> int:
    gf = read_genome(args.genome_file)
    if args.task is not None and Task.parse(args.task) is not gf.task:
        raise GenomeFileError(
            f"{args.genome_file} was trained for {gf.task.name}, asked to evaluate {args.task}"
        )
    report = evaluate_genome(
        gf.genome,
        gf.task,
        master_seed=args.seed,
        n_episodes=args.episodes,
        episode_steps=args.episode_steps,
        dims=gf.dims,
    )
    lines = [
        f"task: {gf.task.name}",
        f"episodes: {args.episodes} (seed {args.seed})",
        f"valid: {report.valid} "
        f"({report.validity.satisfied_slots}/{report.validity.required_slots} slots)",
        f"mean fitness: {report.fitness:.5f}",
        f"success: {report.success_count}/{report.n_episodes or args.episodes}"
        f" = {100.0 * report.success_count / max(1, report.n_episodes or args.episodes):.1f}%",
        "morphology:",
        report.morphology.to_text(),
    ]
    text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_render(args) -> int:
    gf = read_genome(args.genome_file)
    config = make_episode(gf.task, args.seed, args.region, episode_steps=args.episode_steps)
    result = render_episode(gf.genome, config, args.out_dir, dims=gf.dims)
    print(f"fitness: {result.fitness:.5f}  success: {result.success}")
    print(f"wrote {config.episode_steps} frames under {args.out_dir}")
    return 0


def cmd_baseline(args) -> int:
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    stats = random_genome_baseline(
        args.task,
        n_genomes=args.genomes,
        seed=args.seed,
        n_episodes=args.episodes,
        jobs=jobs,
    )
    lines = [
        f"task: {args.task}",
        f"genomes: {stats.n_genomes} (seed {args.seed})",
        f"valid rate: {stats.valid_rate:.4f}",
        f"mean fitness: {stats.mean_fitness:.6f}",
        f"std fitness: {stats.std_fitness:.6f}",
        f"max fitness: {stats.max_fitness:.6f}",
    ]
    text = "\n".join(lines)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_archive_stats(args) -> int:
    archive = load_archive_dir(args.archive_dir, total_configurations(args.grid_area))
    filled, score = qd_metrics(archive)
    best = archive.best()
    print(f"elites: {len(archive)}")
    print(f"cells filled: {filled:.2f}% of {archive.total_configurations}")
    print(f"qd score: {score:.6f}")
    if best is not None:
        print(f"best fitness: {best.fitness:.5f} at {best.descriptor}")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "render": cmd_render,
    "baseline": cmd_baseline,
    "archive-stats": cmd_archive_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, GenomeFileError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
