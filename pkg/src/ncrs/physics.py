"""Top-down rigid-body model of the modular robot.

The robot is one rigid body assembled from unit squares (one per
module, mass 1 each), colliding as discs of radius module_size/2.
Wheels are fixed, pointing along the body's +y axis; a wheel's drive
force is proportional to the gap between its commanded ground speed
(command * v_max) and the actual longitudinal speed under it, and
sideways slip under every wheel is damped. There is no noise anywhere;
trajectories depend only on the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ncrs import _kernel_py
from ncrs.backend import kernel
from ncrs.morphology import ModuleKind, Morphology


@dataclass(frozen=True)
class PhysicsConfig:
    """Integration and contact constants (world units, seconds)."""

    dt: float = 0.1  # per environment step
    substeps: int = 4
    v_max: float = 8.0  # wheel top speed
    drive_gain: float = 15.0  # drive force per unit of wheel slip speed
    lateral_damping: float = 30.0  # lateral grip force per unit slip speed
    linear_drag: float = 0.3  # 1/s
    angular_drag: float = 1.0  # 1/s
    module_mass: float = 1.0
    restitution: float = 0.0  # contacts are perfectly inelastic
    wall_friction: float = 0.3
    wall_thickness: float = 0.25  # obstacle collision radius
    ball_radius: float = 1.0
    ball_mass: float = 1.0
    ball_drag: float = 1.0


class RobotBody:
    """Rigid-body constants derived from a morphology.

    Local module coordinates are relative to the center of mass, with
    +x toward higher grid columns and +y toward lower grid rows, so the
    body's +y axis is "up" on the text render. World pose is the center
    of mass plus a heading (0 = body +y aligned with world +y).
    """

    def __init__(self, morph: Morphology, module_size: float = 1.0,
                 module_mass: float = 1.0):
        if len(morph) == 0:
            raise ValueError("cannot build a body from an empty morphology")
        self.morph = morph
        self.module_size = module_size
        cells = sorted(morph.cells)
        h, w = morph.grid_dims
        raw = np.array(
            [
                ((c - (w - 1) / 2.0) * module_size, ((h - 1) / 2.0 - r) * module_size)
                for r, c in cells
            ]
        )
        com = raw.mean(axis=0)
        self.cells = cells
        self.kinds = [morph.cells[rc] for rc in cells]
        self.module_local = np.ascontiguousarray(raw - com)
        self.mass = module_mass * len(cells)
        # Unit square about its center plus the parallel-axis term.
        per_module = module_mass * (module_size**2) / 6.0
        self.inertia = float(
            np.sum(per_module + module_mass * (self.module_local**2).sum(axis=1))
        )
        self.wheel_cells = [rc for rc, k in zip(cells, self.kinds) if k is ModuleKind.WHEEL]
        self.wheel_local = np.ascontiguousarray(
            self.module_local[[k is ModuleKind.WHEEL for k in self.kinds]]
        ).reshape(-1, 2)
        self.sensor_cells = morph.sensor_cells()
        sensor_index = {rc: i for i, rc in enumerate(cells)}
        self._cell_index = sensor_index

    def cell_world_positions(self, x: float, y: float, heading: float) -> np.ndarray:
        """World coordinates of every module center, in self.cells order."""
        c, s = np.cos(heading), np.sin(heading)
        rot_t = np.array([[c, s], [-s, c]])
        return np.array([x, y]) + self.module_local @ rot_t

    def cell_position(self, cell: tuple[int, int], x: float, y: float, heading: float) -> np.ndarray:
        return self.cell_world_positions(x, y, heading)[self._cell_index[cell]]


def pack_params(cfg: PhysicsConfig, module_size: float, playfield: float,
                has_ball: bool) -> np.ndarray:
    params = np.empty(_kernel_py.N_PARAMS, dtype=np.float64)
    params[_kernel_py.P_VMAX] = cfg.v_max
    params[_kernel_py.P_DRIVE] = cfg.drive_gain
    params[_kernel_py.P_LAT] = cfg.lateral_damping
    params[_kernel_py.P_LIN_DRAG] = cfg.linear_drag
    params[_kernel_py.P_ANG_DRAG] = cfg.angular_drag
    params[_kernel_py.P_WALL_MU] = cfg.wall_friction
    params[_kernel_py.P_WALL_THICK] = cfg.wall_thickness
    params[_kernel_py.P_MOD_RADIUS] = module_size / 2.0
    params[_kernel_py.P_BALL_RADIUS] = cfg.ball_radius
    params[_kernel_py.P_BALL_MASS] = cfg.ball_mass
    params[_kernel_py.P_BALL_DRAG] = cfg.ball_drag
    params[_kernel_py.P_PLAYFIELD] = playfield
    params[_kernel_py.P_HAS_BALL] = 1.0 if has_ball else 0.0
    return params


def step_world(
    state: np.ndarray,
    body: RobotBody,
    commands: np.ndarray,
    segments: np.ndarray,
    params: np.ndarray,
    cfg: PhysicsConfig,
) -> None:
    """Advance the packed world state in place by one environment step.

    ``state`` is the 10-float vector documented in ncrs._kernel_py;
    ``commands`` aligns with body.wheel_cells and must be finite.
    """
    if not np.all(np.isfinite(commands)):
        raise ValueError("wheel commands must be finite")
    kernel.advance_world(
        state,
        body.module_local,
        body.wheel_local,
        np.ascontiguousarray(commands, dtype=np.float64),
        body.mass,
        body.inertia,
        segments,
        params,
        cfg.dt,
        cfg.substeps,
    )
