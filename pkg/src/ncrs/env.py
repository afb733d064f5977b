"""Benchmark tasks: scenario generation, sensing, stepping and scoring.

Three tasks on a 60x60 playfield. Light chasing (LC) starts the robot
at the center with a light near one of the four corners. Light chasing
with obstacle (LCO) puts the robot at the bottom, a funnel-shaped wall
with a 3-unit passage in the middle, and the light at the top. Carrying
ball to target (CBT) asks the robot to push a mid-field ball into a
target area at the top.

Sensor activity and per-step scores use the same exponential falloff
exp(-distance / playfield), so both live in (0, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ncrs.channels import ChannelLayout, Task, unpack_genome
from ncrs.morphology import (
    ModuleKind,
    Morphology,
    ValidityReport,
    extract_body,
    invalid_score,
    validate,
)
from ncrs.nca import control_tick, develop
from ncrs.physics import PhysicsConfig, RobotBody, pack_params, step_world

PLAYFIELD = 60.0
MODULE_SIZE = 1.0
EPISODE_STEPS = 100
SUCCESS_RADIUS_MODULES = 10.0
N_REGIONS = 4

# LC: light jitter disc around anchors set in 5 units from each corner.
CORNER_ANCHORS = ((5.0, 5.0), (55.0, 5.0), (5.0, 55.0), (55.0, 55.0))
LIGHT_JITTER_RADIUS = 5.0

# LCO/CBT: four horizontal bands (left, center-left, center-right, right).
BAND_MARGIN = 2.5
BOTTOM_Y = 5.0
TOP_Y = 55.0
BALL_Y = 30.0

PASSAGE_Y = 35.0  # obstacle mouth height, fixed
FUNNEL_EDGE_Y = 25.0  # wall height at the playfield edges
WALL_SEGMENTS_PER_SIDE = 6
DEFAULT_ROUGHNESS = 1.0


@dataclass(frozen=True)
class ObstacleSpec:
    """Funnel wall: two polylines rising from the field edges to the
    passage mouth, leaving a vertical corridor of ``passage_width``
    around ``passage_center_x`` free of geometry."""

    left_wall: np.ndarray  # (v, 2)
    right_wall: np.ndarray  # (v, 2)
    passage_center_x: float
    passage_width: float
    passage_y: float
    roughness: float

    def segments(self) -> np.ndarray:
        segs = []
        for wall in (self.left_wall, self.right_wall):
            for a, b in zip(wall[:-1], wall[1:]):
                segs.append((a[0], a[1], b[0], b[1]))
        return np.ascontiguousarray(segs, dtype=np.float64)


def generate_obstacle(
    rng: np.random.Generator,
    passage_width: float,
    roughness: float,
    playfield: float = PLAYFIELD,
) -> ObstacleSpec:
    if passage_width <= 0:
        raise ValueError("passage width must be positive")
    if passage_width >= playfield:
        raise ValueError("passage width must be smaller than the playfield")
    if roughness < 0:
        raise ValueError("roughness must be >= 0")
    cx = float(rng.uniform(passage_width, playfield - passage_width))
    half = passage_width / 2.0
    n = WALL_SEGMENTS_PER_SIDE + 1

    left = np.column_stack(
        [np.linspace(0.0, cx - half, n), np.linspace(FUNNEL_EDGE_Y, PASSAGE_Y, n)]
    )
    right = np.column_stack(
        [np.linspace(cx + half, playfield, n), np.linspace(PASSAGE_Y, FUNNEL_EDGE_Y, n)]
    )
    # Perturb vertex heights only; x stays put so the corridor invariant
    # holds by construction. The passage-mouth vertices stay exact.
    left[:-1, 1] += rng.uniform(-roughness, roughness, n - 1)
    right[1:, 1] += rng.uniform(-roughness, roughness, n - 1)
    return ObstacleSpec(
        left_wall=left,
        right_wall=right,
        passage_center_x=cx,
        passage_width=passage_width,
        passage_y=PASSAGE_Y,
        roughness=roughness,
    )


@dataclass(frozen=True)
class EpisodeConfig:
    task: Task
    seed: int
    region_index: int
    robot_start: tuple[float, float]
    robot_heading: float
    light: tuple[float, float] | None
    ball: tuple[float, float] | None
    target: tuple[float, float] | None
    obstacle: ObstacleSpec | None
    episode_steps: int = EPISODE_STEPS
    playfield: float = PLAYFIELD
    module_size: float = MODULE_SIZE
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    roughness: float = DEFAULT_ROUGHNESS


def _band(region_index: int, playfield: float) -> tuple[float, float]:
    width = playfield / N_REGIONS
    return region_index * width + BAND_MARGIN, (region_index + 1) * width - BAND_MARGIN


def make_episode(
    task: Task,
    seed: int,
    region_index: int,
    episode_steps: int = EPISODE_STEPS,
    physics: PhysicsConfig | None = None,
    roughness: float = DEFAULT_ROUGHNESS,
) -> EpisodeConfig:
    """Deterministic scenario for (task, seed, region_index)."""
    if not 0 <= region_index < N_REGIONS:
        raise ValueError(f"region_index must be in [0, {N_REGIONS}), got {region_index}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), region_index, task.value)))
    physics = physics or PhysicsConfig()
    light = ball = target = obstacle = None
    pf = PLAYFIELD

    if task is Task.LC:
        robot_start = (pf / 2.0, pf / 2.0)
        anchor = CORNER_ANCHORS[region_index]
        angle = rng.uniform(0.0, 2.0 * math.pi)
        radius = LIGHT_JITTER_RADIUS * math.sqrt(rng.uniform())
        light = (
            float(np.clip(anchor[0] + radius * math.cos(angle), 0.0, pf)),
            float(np.clip(anchor[1] + radius * math.sin(angle), 0.0, pf)),
        )
    elif task is Task.LCO:
        robot_start = (float(rng.uniform(10.0, pf - 10.0)), BOTTOM_Y)
        obstacle = generate_obstacle(rng, 3.0 * MODULE_SIZE, roughness, pf)
        lo, hi = _band(region_index, pf)
        light = (float(rng.uniform(lo, hi)), TOP_Y)
    elif task is Task.CBT:
        lo, hi = _band(region_index, pf)
        ball = (float(rng.uniform(lo, hi)), BALL_Y)
        target = (float(rng.uniform(10.0, pf - 10.0)), TOP_Y)
        robot_start = (float(rng.uniform(10.0, pf - 10.0)), BOTTOM_Y)
    else:
        raise ValueError(f"unhandled task {task}")

    return EpisodeConfig(
        task=task,
        seed=int(seed),
        region_index=region_index,
        robot_start=robot_start,
        robot_heading=0.0,
        light=light,
        ball=ball,
        target=target,
        obstacle=obstacle,
        episode_steps=episode_steps,
        physics=physics,
        roughness=roughness,
    )


def sensor_activity(distance: float, playfield: float = PLAYFIELD) -> float:
    """Exponential falloff of a distance reading, in (0, 1]."""
    if distance < 0:
        raise ValueError("distance must be >= 0")
    return math.exp(-distance / playfield)


@dataclass
class WorldState:
    """Simulated state after ``step_index`` environment steps."""

    x: float
    y: float
    heading: float
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    light: tuple[float, float] | None = None
    ball: tuple[float, float] | None = None
    ball_vel: tuple[float, float] = (0.0, 0.0)
    target: tuple[float, float] | None = None
    step_index: int = 0

    @classmethod
    def initial(cls, config: EpisodeConfig) -> WorldState:
        return cls(
            x=config.robot_start[0],
            y=config.robot_start[1],
            heading=config.robot_heading,
            light=config.light,
            ball=config.ball,
            target=config.target,
        )

    def packed(self) -> np.ndarray:
        ball = self.ball if self.ball is not None else (np.nan, np.nan)
        return np.array(
            [
                self.x,
                self.y,
                self.heading,
                self.vx,
                self.vy,
                self.omega,
                ball[0],
                ball[1],
                self.ball_vel[0],
                self.ball_vel[1],
            ],
            dtype=np.float64,
        )

    def with_packed(self, state: np.ndarray, step_index: int) -> WorldState:
        return replace(
            self,
            x=float(state[0]),
            y=float(state[1]),
            heading=float(state[2]),
            vx=float(state[3]),
            vy=float(state[4]),
            omega=float(state[5]),
            ball=None if self.ball is None else (float(state[6]), float(state[7])),
            ball_vel=(float(state[8]), float(state[9])) if self.ball is not None else (0.0, 0.0),
            step_index=step_index,
        )


def read_sensors(
    world: WorldState,
    body: RobotBody,
    config: EpisodeConfig,
) -> dict[tuple[int, int], float]:
    """Per-sensor-cell activity of the distance to its tracked object."""
    positions = body.cell_world_positions(world.x, world.y, world.heading)
    beacon = world.ball if config.task is Task.CBT else world.light
    readings: dict[tuple[int, int], float] = {}
    for cell, kind, pos in zip(body.cells, body.kinds, positions):
        if kind is ModuleKind.LIGHT_BALL_SENSOR:
            obj = beacon
        elif kind is ModuleKind.TARGET_SENSOR:
            obj = world.target
        else:
            continue
        dist = math.hypot(pos[0] - obj[0], pos[1] - obj[1])
        readings[cell] = sensor_activity(dist, config.playfield)
    return readings


def env_step(
    world: WorldState,
    body: RobotBody,
    wheel_commands: dict[tuple[int, int], float],
    config: EpisodeConfig,
) -> WorldState:
    """One environment step under per-wheel commands in [-1, 1]."""
    commands = np.array([wheel_commands[c] for c in body.wheel_cells], dtype=np.float64)
    state = world.packed()
    segments = config.obstacle.segments() if config.obstacle is not None else np.zeros((0, 4))
    params = pack_params(config.physics, config.module_size, config.playfield,
                         has_ball=world.ball is not None)
    step_world(state, body, commands, segments, params, config.physics)
    return world.with_packed(state, world.step_index + 1)


def _step_score(state: np.ndarray, config: EpisodeConfig) -> tuple[float, float]:
    """(per-step score, distance that defines success) for the packed state."""
    if config.task is Task.CBT:
        d_robot_ball = math.hypot(state[0] - state[6], state[1] - state[7])
        d_ball_target = math.hypot(
            state[6] - config.target[0], state[7] - config.target[1]
        )
        score = 0.5 * (
            sensor_activity(d_robot_ball, config.playfield)
            + sensor_activity(d_ball_target, config.playfield)
        )
        return score, d_ball_target
    d = math.hypot(state[0] - config.light[0], state[1] - config.light[1])
    return sensor_activity(d, config.playfield), d


TRAJECTORY_COLUMNS = (
    "step",
    "robot_x",
    "robot_y",
    "heading",
    "light_x",
    "light_y",
    "ball_x",
    "ball_y",
    "target_x",
    "target_y",
    "score",
)


@dataclass
class EpisodeResult:
    fitness: float
    success: bool
    trajectory: np.ndarray  # rows of TRAJECTORY_COLUMNS


def _run_with_body(
    genome: np.ndarray,
    body: RobotBody,
    control_grid: np.ndarray,
    config: EpisodeConfig,
    layout: ChannelLayout,
    on_step=None,
) -> EpisodeResult:
    net = unpack_genome(genome, layout)
    world = WorldState.initial(config)
    state = world.packed()
    segments = config.obstacle.segments() if config.obstacle is not None else np.zeros((0, 4))
    params = pack_params(config.physics, config.module_size, config.playfield,
                         has_ball=config.ball is not None)
    grid = control_grid.copy()
    light = config.light if config.light is not None else (np.nan, np.nan)
    target = config.target if config.target is not None else (np.nan, np.nan)

    trajectory = np.empty((config.episode_steps, len(TRAJECTORY_COLUMNS)))
    scores = np.empty(config.episode_steps)
    success_dist = np.empty(config.episode_steps)
    threshold = SUCCESS_RADIUS_MODULES * config.module_size

    for step in range(config.episode_steps):
        world = world.with_packed(state, step)
        sensors = read_sensors(world, body, config)
        grid, commands = control_tick(grid, net, body.morph, sensors)
        cmd_vec = np.array([commands[c] for c in body.wheel_cells], dtype=np.float64)
        step_world(state, body, cmd_vec, segments, params, config.physics)
        scores[step], success_dist[step] = _step_score(state, config)
        trajectory[step] = (
            step,
            state[0],
            state[1],
            state[2],
            light[0],
            light[1],
            state[6],
            state[7],
            target[0],
            target[1],
            scores[step],
        )
        if on_step is not None:
            on_step(step, world.with_packed(state, step + 1), grid)

    return EpisodeResult(
        fitness=float(scores.mean()),
        success=bool(success_dist.min() < threshold),
        trajectory=trajectory,
    )


def control_grid_for(morph: Morphology, layout: ChannelLayout) -> np.ndarray:
    """Grid configured for the control phase: body and one-hot type
    channels fixed to the morphology, flag 1, hidden and io zeroed."""
    h, w = morph.grid_dims
    grid = np.zeros((h, w, layout.n_total), dtype=np.float64)
    grid[:, :, layout.flag] = 1.0
    kinds = {
        ModuleKind.TISSUE: layout.type_tissue,
        ModuleKind.LIGHT_BALL_SENSOR: layout.type_light_sensor,
        ModuleKind.WHEEL: layout.type_wheel,
    }
    if layout.n_type_channels == 4:
        kinds[ModuleKind.TARGET_SENSOR] = layout.type_target_sensor
    for (r, c), kind in morph.cells.items():
        grid[r, c, layout.body] = 1.0
        grid[r, c, kinds[kind]] = 1.0
    return grid


def run_episode(
    genome: np.ndarray,
    config: EpisodeConfig,
    dims: tuple[int, int] = (5, 5),
) -> EpisodeResult:
    """Grow the genome's robot and run it through one scenario.

    The caller is responsible for validity gating; any morphology with
    at least one module will run (a wheelless one simply never moves).
    """
    layout = config.task.layout()
    grown = develop(genome, layout, dims)
    morph = extract_body(grown, layout)
    body = RobotBody(morph, config.module_size, config.physics.module_mass)
    grid = control_grid_for(morph, layout)
    return _run_with_body(genome, body, grid, config, layout)


def write_trajectory_csv(path, trajectory: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in trajectory:
            writer.writerow([int(row[0])] + [repr(v) for v in row[1:]])


@dataclass
class FitnessReport:
    """Outcome of the 12-episode evaluation battery (or the validity gate)."""

    fitness: float
    valid: bool
    success_count: int
    features: tuple[int, int, int] | None
    validity: ValidityReport
    morphology: Morphology
    n_episodes: int = 0


def episode_seeds(master_seed: int, n_episodes: int) -> list[tuple[int, int]]:
    """(seed, region) pairs: regions cycle 0..3, seeds drawn per cycle."""
    reps = (n_episodes + N_REGIONS - 1) // N_REGIONS
    seeds = np.random.SeedSequence(int(master_seed)).generate_state(reps, dtype=np.uint64)
    return [
        (int(seeds[i // N_REGIONS]), i % N_REGIONS) for i in range(n_episodes)
    ]


def evaluate_genome(
    genome: np.ndarray,
    task: Task,
    master_seed: int,
    n_episodes: int = 12,
    episode_steps: int = EPISODE_STEPS,
    physics: PhysicsConfig | None = None,
    dims: tuple[int, int] = (5, 5),
) -> FitnessReport:
    """Validity-gated fitness: invalid designs score their slot credit
    and are never simulated; valid ones average ``n_episodes`` runs."""
    layout = task.layout()
    grown = develop(genome, layout, dims)
    morph = extract_body(grown, layout)
    report = validate(morph, task)
    if not report.valid:
        return FitnessReport(
            fitness=invalid_score(report),
            valid=False,
            success_count=0,
            features=None,
            validity=report,
            morphology=morph,
        )

    body = RobotBody(morph, MODULE_SIZE, (physics or PhysicsConfig()).module_mass)
    grid = control_grid_for(morph, layout)
    total = 0.0
    successes = 0
    for seed, region in episode_seeds(master_seed, n_episodes):
        config = make_episode(task, seed, region, episode_steps, physics)
        result = _run_with_body(genome, body, grid, config, layout)
        total += result.fitness
        successes += int(result.success)
    features = (
        morph.sensors_light + morph.sensors_target,
        morph.wheels,
        len(morph),
    )
    return FitnessReport(
        fitness=total / n_episodes,
        valid=True,
        success_count=successes,
        features=features,
        validity=report,
        morphology=morph,
        n_episodes=n_episodes,
    )
