"""Run configuration: a flat key = value text format with # comments.

Defaults reproduce the full-scale training shape (population 112 for
cma-es, 128 with 15 emitters for cma-me, step size 0.01, 100-step
episodes on the 60-unit playfield); desk-scale runs override them.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from ncrs.channels import Task
from ncrs.physics import PhysicsConfig


class ConfigError(ValueError):
    pass


CMA_ES_POPULATION = 112
CMA_ME_POPULATION = 128
CMA_ES_GENERATIONS = 20_000
CMA_ME_GENERATIONS = 60_000
N_EMITTERS = 15


@dataclass
class RunConfig:
    task: str = "lc"
    optimizer: str = "cma-es"  # or "cma-me"
    grid_height: int = 5
    grid_width: int = 5
    population: int = 0  # 0 = optimizer default (112 / 128)
    emitters: int = N_EMITTERS
    generations: int = 0  # 0 = optimizer default (20000 / 60000)
    seed: int = 0
    sigma0: float = 0.01
    train_episodes: int = 12
    test_episodes: int = 100
    episode_steps: int = 100
    archive_grid_area: int = 0  # 0 = grid_height * grid_width
    jobs: int = 1
    out_dir: str = "runs/out"
    # physics constants, defaults recorded in PhysicsConfig
    dt: float = PhysicsConfig.dt
    substeps: int = PhysicsConfig.substeps
    v_max: float = PhysicsConfig.v_max
    drive_gain: float = PhysicsConfig.drive_gain
    lateral_damping: float = PhysicsConfig.lateral_damping
    linear_drag: float = PhysicsConfig.linear_drag
    angular_drag: float = PhysicsConfig.angular_drag
    module_mass: float = PhysicsConfig.module_mass
    restitution: float = PhysicsConfig.restitution
    wall_friction: float = PhysicsConfig.wall_friction
    wall_thickness: float = PhysicsConfig.wall_thickness
    ball_radius: float = PhysicsConfig.ball_radius
    ball_mass: float = PhysicsConfig.ball_mass
    ball_drag: float = PhysicsConfig.ball_drag

    def resolved_task(self) -> Task:
        return Task.parse(self.task)

    def resolved_population(self) -> int:
        if self.population:
            return self.population
        return CMA_ME_POPULATION if self.optimizer == "cma-me" else CMA_ES_POPULATION

    def resolved_generations(self) -> int:
        if self.generations:
            return self.generations
        return CMA_ME_GENERATIONS if self.optimizer == "cma-me" else CMA_ES_GENERATIONS

    def resolved_archive_area(self) -> int:
        return self.archive_grid_area or self.grid_height * self.grid_width

    def physics(self) -> PhysicsConfig:
        return PhysicsConfig(
            dt=self.dt,
            substeps=self.substeps,
            v_max=self.v_max,
            drive_gain=self.drive_gain,
            lateral_damping=self.lateral_damping,
            linear_drag=self.linear_drag,
            angular_drag=self.angular_drag,
            module_mass=self.module_mass,
            restitution=self.restitution,
            wall_friction=self.wall_friction,
            wall_thickness=self.wall_thickness,
            ball_radius=self.ball_radius,
            ball_mass=self.ball_mass,
            ball_drag=self.ball_drag,
        )

    def validate(self) -> None:
        if self.optimizer not in ("cma-es", "cma-me"):
            raise ConfigError(f"optimizer must be cma-es or cma-me, got {self.optimizer!r}")
        self.resolved_task()
        if self.grid_height % 2 == 0 or self.grid_width % 2 == 0:
            raise ConfigError("grid dims must be odd")
        for name in ("emitters", "train_episodes", "test_episodes", "episode_steps", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.sigma0 <= 0:
            raise ConfigError("sigma0 must be positive")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if kind in ("int", int):
                values[key] = int(value)
            elif kind in ("float", float):
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(
                f"{source}:{lineno}: cannot parse {value!r} as {kind} for {key}"
            ) from None
    config = RunConfig(**values)
    try:
        config.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return config


def serialize_config(config: RunConfig) -> str:
    lines = ["# ncrs run configuration"]
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text(), source=str(path))
