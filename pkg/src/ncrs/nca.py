"""The neural cellular automaton substrate.

One grid, two regimes. With the control flag at 0 the automaton grows a
body out of a single seed cell for ten steps. With the flag at 1 the
grown body is frozen into the body/type channels and the automaton
routes sensor readings (written into the io channel) to wheel commands
(read from the io channel), two steps per environment step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ncrs.backend import kernel
from ncrs.channels import ChannelLayout, GenomeNet, unpack_genome

DEVELOP_STEPS = 10
CONTROL_STEPS_PER_TICK = 2
ALIVE_THRESHOLD = 0.1
STATE_CLIP = 5.0
ACTUATOR_CLIP = 1.0


@dataclass
class AliveMask:
    """Mature cells (body above threshold) and their update halo."""

    mature: np.ndarray  # (H, W) bool
    updatable: np.ndarray  # (H, W) bool; mature plus 8-neighborhood


@dataclass(frozen=True)
class FrozenSpec:
    """What a step must restore after updating.

    ``channels`` are restored everywhere; ``cells`` are (row, col,
    channel) triples restored individually.
    """

    channels: tuple[int, ...] = ()
    cells: tuple[tuple[int, int, int], ...] = ()


def seed_state(layout: ChannelLayout, dims: tuple[int, int] = (5, 5)) -> np.ndarray:
    """Initial grid: a single seed, body value 1 at the center cell."""
    h, w = dims
    if h % 2 == 0 or w % 2 == 0:
        raise ValueError(f"grid dims must be odd so a unique center exists, got {dims}")
    grid = np.zeros((h, w, layout.n_total), dtype=np.float64)
    grid[h // 2, w // 2, layout.body] = 1.0
    return grid


def alive_mask(grid: np.ndarray, layout: ChannelLayout = ChannelLayout()) -> AliveMask:
    mature = grid[:, :, layout.body] > ALIVE_THRESHOLD
    updatable = np.zeros_like(mature)
    h, w = mature.shape
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            src = mature[
                max(0, -dy) : h - max(0, dy),
                max(0, -dx) : w - max(0, dx),
            ]
            updatable[
                max(0, dy) : h - max(0, -dy),
                max(0, dx) : w - max(0, -dx),
            ] |= src
    return AliveMask(mature=mature, updatable=updatable)


def _step(grid: np.ndarray, net: GenomeNet, frozen: FrozenSpec) -> np.ndarray:
    mask = alive_mask(grid, net.layout)
    out = kernel.step_cells(
        np.ascontiguousarray(grid),
        mask.updatable,
        net.conv_w,
        net.conv_b,
        net.dense1_w,
        net.dense1_b,
        net.dense2_w,
        net.dense2_b,
    )
    for ch in frozen.channels:
        out[:, :, ch] = grid[:, :, ch]
    for r, c, ch in frozen.cells:
        out[r, c, ch] = grid[r, c, ch]
    return out


def nca_step(
    grid: np.ndarray,
    genome: np.ndarray,
    layout: ChannelLayout = ChannelLayout(),
    frozen: FrozenSpec | None = None,
) -> np.ndarray:
    """One synchronous update; the control flag is always restored."""
    net = unpack_genome(genome, layout)
    if frozen is None:
        frozen = FrozenSpec(channels=(layout.flag,))
    elif layout.flag not in frozen.channels:
        frozen = FrozenSpec(channels=(layout.flag, *frozen.channels), cells=frozen.cells)
    return _step(grid, net, frozen)


def develop(
    genome: np.ndarray,
    layout: ChannelLayout = ChannelLayout(),
    dims: tuple[int, int] = (5, 5),
    steps: int = DEVELOP_STEPS,
) -> np.ndarray:
    """Grow a body: ``steps`` updates from the seed, flag held at 0."""
    net = unpack_genome(genome, layout)
    grid = seed_state(layout, dims)
    frozen = FrozenSpec(channels=(layout.flag,))
    for _ in range(steps):
        grid = _step(grid, net, frozen)
    return grid


def control_frozen_spec(layout: ChannelLayout, sensor_cells: tuple[tuple[int, int], ...]) -> FrozenSpec:
    """During control: flag, body and type channels fixed, sensor io cells pinned."""
    return FrozenSpec(
        channels=(layout.flag, layout.body, *layout.types),
        cells=tuple((r, c, layout.io) for r, c in sensor_cells),
    )


def control_tick(
    grid: np.ndarray,
    genome_or_net: np.ndarray | GenomeNet,
    morphology,
    sensor_values: dict[tuple[int, int], float],
    layout: ChannelLayout | None = None,
) -> tuple[np.ndarray, dict[tuple[int, int], float]]:
    """Two control-phase updates producing one set of wheel commands.

    Sensor io cells are overwritten with their readings before each
    update; wheel commands are the io values at wheel cells after the
    second update, clipped to [-1, 1].
    """
    if isinstance(genome_or_net, GenomeNet):
        net = genome_or_net
    else:
        if layout is None:
            layout = ChannelLayout()
        net = unpack_genome(genome_or_net, layout)
    layout = net.layout

    expected = set(morphology.sensor_cells())
    if set(sensor_values) != expected:
        raise ValueError(
            f"sensor_values keys {sorted(sensor_values)} do not match "
            f"morphology sensor cells {sorted(expected)}"
        )

    frozen = control_frozen_spec(layout, tuple(sorted(expected)))
    grid = grid.copy()  # inputs stay immutable; sensor writes go to our copy
    for _ in range(CONTROL_STEPS_PER_TICK):
        for (r, c), value in sensor_values.items():
            grid[r, c, layout.io] = value
        grid = _step(grid, net, frozen)

    commands = {
        cell: float(np.clip(grid[cell[0], cell[1], layout.io], -ACTUATOR_CLIP, ACTUATOR_CLIP))
        for cell in morphology.wheel_cells()
    }
    return grid, commands
