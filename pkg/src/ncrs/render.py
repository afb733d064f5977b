"""Flat-color frame and channel renders, written as binary PPM.

Scene frames paint the playfield top-down (image row 0 is the top wall)
with the obstacle walls, light/ball/target markers and the robot's
modules colored by kind. Channel strips lay the grid's channels side by
side in grayscale, one panel per channel, for inspecting the automaton.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ncrs.channels import ChannelLayout, unpack_genome
from ncrs.env import (
    EpisodeConfig,
    EpisodeResult,
    WorldState,
    _run_with_body,
    control_grid_for,
    write_trajectory_csv,
)
from ncrs.morphology import ModuleKind, extract_body
from ncrs.nca import DEVELOP_STEPS, nca_step, seed_state
from ncrs.physics import RobotBody

MODULE_COLORS = {
    ModuleKind.TISSUE: (150, 150, 150),
    ModuleKind.LIGHT_BALL_SENSOR: (40, 90, 220),
    ModuleKind.TARGET_SENSOR: (0, 180, 180),
    ModuleKind.WHEEL: (30, 30, 30),
}
BACKGROUND = (245, 245, 240)
WALL_COLOR = (80, 60, 50)
LIGHT_COLOR = (250, 210, 40)
BALL_COLOR = (235, 120, 30)
TARGET_COLOR = (120, 220, 120)
SCALE = 6  # pixels per world unit


def write_ppm(path, image: np.ndarray) -> None:
    """Binary P6 image from an (H, W, 3) uint8 array."""
    h, w, _ = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def _world_grid(playfield: float, scale: int) -> tuple[np.ndarray, np.ndarray]:
    side = int(round(playfield * scale))
    px = (np.arange(side) + 0.5) / scale
    xs = np.broadcast_to(px, (side, side))
    ys = np.broadcast_to(playfield - px[:, None], (side, side))
    return xs, ys


def _paint_disc(img, xs, ys, center, radius, color) -> None:
    mask = (xs - center[0]) ** 2 + (ys - center[1]) ** 2 <= radius**2
    img[mask] = color


def render_frame(world: WorldState, body: RobotBody, config: EpisodeConfig,
                 scale: int = SCALE) -> np.ndarray:
    xs, ys = _world_grid(config.playfield, scale)
    img = np.empty((*xs.shape, 3), dtype=np.uint8)
    img[:] = BACKGROUND

    if config.target is not None:
        _paint_disc(img, xs, ys, config.target, 3.0, TARGET_COLOR)
    if config.obstacle is not None:
        thick = config.physics.wall_thickness
        for seg in config.obstacle.segments():
            dx, dy = seg[2] - seg[0], seg[3] - seg[1]
            denom = dx * dx + dy * dy
            t = ((xs - seg[0]) * dx + (ys - seg[1]) * dy) / denom if denom else 0.0
            t = np.clip(t, 0.0, 1.0)
            dist2 = (xs - (seg[0] + t * dx)) ** 2 + (ys - (seg[1] + t * dy)) ** 2
            img[dist2 <= thick**2] = WALL_COLOR
    if world.light is not None:
        _paint_disc(img, xs, ys, world.light, 1.5, LIGHT_COLOR)
    if world.ball is not None:
        _paint_disc(img, xs, ys, world.ball, config.physics.ball_radius, BALL_COLOR)

    # Rotate pixels into the body frame and look up the module map.
    c, s = np.cos(world.heading), np.sin(world.heading)
    rel_x = xs - world.x
    rel_y = ys - world.y
    local_x = c * rel_x + s * rel_y
    local_y = -s * rel_x + c * rel_y
    half = config.module_size / 2.0
    for local, kind in zip(body.module_local, body.kinds):
        inside = (np.abs(local_x - local[0]) <= half) & (np.abs(local_y - local[1]) <= half)
        img[inside] = MODULE_COLORS[kind]
    return img


def render_channel_strip(grid: np.ndarray, layout: ChannelLayout,
                         cell_px: int = 16, gap: int = 2) -> np.ndarray:
    """All channels side by side, grayscale over the [-5, 5] state range."""
    h, w, n = grid.shape
    assert n == layout.n_total
    panel_w = w * cell_px
    strip = np.full((h * cell_px, n * panel_w + (n - 1) * gap, 3), 60, dtype=np.uint8)
    levels = np.clip((grid + 5.0) / 10.0 * 255.0, 0, 255).astype(np.uint8)
    for ch in range(n):
        panel = np.repeat(np.repeat(levels[:, :, ch], cell_px, 0), cell_px, 1)
        x0 = ch * (panel_w + gap)
        strip[:, x0 : x0 + panel_w] = panel[:, :, None]
    return strip


def render_episode(genome: np.ndarray, config: EpisodeConfig, out_dir,
                   dims: tuple[int, int] = (5, 5), scale: int = SCALE) -> EpisodeResult:
    """Run one episode, writing a frame and a channel strip per step.

    Output tree: frames/step_###.ppm, strips/dev_##.ppm and
    strips/step_###.ppm, trajectory.csv. Returns the episode result.
    """
    out = Path(out_dir)
    frames_dir = out / "frames"
    strips_dir = out / "strips"
    frames_dir.mkdir(parents=True, exist_ok=True)
    strips_dir.mkdir(parents=True, exist_ok=True)

    layout = config.task.layout()
    unpack_genome(genome, layout)  # validate length before any output

    grid = seed_state(layout, dims)
    write_ppm(strips_dir / "dev_00.ppm", render_channel_strip(grid, layout))
    for step in range(DEVELOP_STEPS):
        grid = nca_step(grid, genome, layout)
        write_ppm(strips_dir / f"dev_{step + 1:02d}.ppm", render_channel_strip(grid, layout))

    morph = extract_body(grid, layout)
    body = RobotBody(morph, config.module_size, config.physics.module_mass)

    def on_step(step: int, world: WorldState, control_grid: np.ndarray) -> None:
        write_ppm(frames_dir / f"step_{step:03d}.ppm", render_frame(world, body, config, scale))
        write_ppm(strips_dir / f"step_{step:03d}.ppm", render_channel_strip(control_grid, layout))

    result = _run_with_body(
        genome, body, control_grid_for(morph, layout), config, layout, on_step=on_step
    )
    write_trajectory_csv(out / "trajectory.csv", result.trajectory)
    return result
