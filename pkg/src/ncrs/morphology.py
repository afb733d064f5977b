"""Reading a robot out of a grown grid, and judging whether it can run.

A cell is part of the body when its body channel exceeds the alive
threshold; its module kind is the argmax over the type channels (first
channel wins ties). Cells not 4-connected to the seed's component are
pruned: the simulated robot is one rigid body, and growth starts at the
seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ncrs.channels import ChannelLayout, Task
from ncrs.nca import ALIVE_THRESHOLD


class ModuleKind(Enum):
    TISSUE = "T"
    LIGHT_BALL_SENSOR = "S"
    TARGET_SENSOR = "A"
    WHEEL = "W"


# Order matches the type-channel order in ChannelLayout.
def _kinds_for(layout: ChannelLayout) -> list[ModuleKind]:
    if layout.n_type_channels == 3:
        return [ModuleKind.TISSUE, ModuleKind.LIGHT_BALL_SENSOR, ModuleKind.WHEEL]
    if layout.n_type_channels == 4:
        return [
            ModuleKind.TISSUE,
            ModuleKind.LIGHT_BALL_SENSOR,
            ModuleKind.TARGET_SENSOR,
            ModuleKind.WHEEL,
        ]
    raise ValueError(f"unsupported type-channel count {layout.n_type_channels}")


@dataclass
class Morphology:
    cells: dict[tuple[int, int], ModuleKind]
    seed_cell: tuple[int, int]
    grid_dims: tuple[int, int]

    @property
    def sensors_light(self) -> int:
        return sum(1 for k in self.cells.values() if k is ModuleKind.LIGHT_BALL_SENSOR)

    @property
    def sensors_target(self) -> int:
        return sum(1 for k in self.cells.values() if k is ModuleKind.TARGET_SENSOR)

    @property
    def wheels(self) -> int:
        return sum(1 for k in self.cells.values() if k is ModuleKind.WHEEL)

    @property
    def tissue(self) -> int:
        return sum(1 for k in self.cells.values() if k is ModuleKind.TISSUE)

    def __len__(self) -> int:
        return len(self.cells)

    def sensor_cells(self) -> list[tuple[int, int]]:
        """Cells that receive sensor input (both sensor kinds), sorted."""
        return sorted(
            c
            for c, k in self.cells.items()
            if k in (ModuleKind.LIGHT_BALL_SENSOR, ModuleKind.TARGET_SENSOR)
        )

    def wheel_cells(self) -> list[tuple[int, int]]:
        return sorted(c for c, k in self.cells.items() if k is ModuleKind.WHEEL)

    def to_text(self) -> str:
        """Character-grid export: '.' empty, then one letter per kind."""
        h, w = self.grid_dims
        rows = []
        for r in range(h):
            rows.append(
                "".join(
                    self.cells[(r, c)].value if (r, c) in self.cells else "."
                    for c in range(w)
                )
            )
        return "\n".join(rows)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    satisfied_slots: int
    required_slots: int
    correct_parts: int = 0  # modules of a required kind, uncapped count


def extract_body(grid: np.ndarray, layout: ChannelLayout = ChannelLayout()) -> Morphology:
    """Typed module map of a grown grid, pruned to the seed's component."""
    h, w, _ = grid.shape
    seed = (h // 2, w // 2)
    kinds = _kinds_for(layout)
    body = grid[:, :, layout.body] > ALIVE_THRESHOLD
    cells: dict[tuple[int, int], ModuleKind] = {}
    if body[seed]:
        type_vals = grid[:, :, layout.types.start : layout.types.stop]
        # BFS over 4-connected mature cells from the seed; the rest prunes away.
        stack = [seed]
        seen = {seed}
        while stack:
            r, c = stack.pop()
            kind_idx = int(np.argmax(type_vals[r, c]))  # first index wins ties
            cells[(r, c)] = kinds[kind_idx]
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < h and 0 <= cc < w and body[rr, cc] and (rr, cc) not in seen:
                    seen.add((rr, cc))
                    stack.append((rr, cc))
    return Morphology(cells=cells, seed_cell=seed, grid_dims=(h, w))


def validate(morph: Morphology, task: Task) -> ValidityReport:
    """Slot check: one slot per required sensor kind, two for wheels."""
    if task is Task.CBT:
        satisfied = (
            (1 if morph.sensors_light >= 1 else 0)
            + (1 if morph.sensors_target >= 1 else 0)
            + min(morph.wheels, 2)
        )
        required = 4
        correct = morph.sensors_light + morph.sensors_target + morph.wheels
    else:
        if morph.sensors_target:
            raise ValueError(f"{task} morphology cannot contain target sensors")
        satisfied = (1 if morph.sensors_light >= 1 else 0) + min(morph.wheels, 2)
        required = 3
        correct = morph.sensors_light + morph.wheels
    return ValidityReport(
        valid=satisfied == required,
        satisfied_slots=satisfied,
        required_slots=required,
        correct_parts=correct,
    )


# Together with the 0.01-per-part rule this keeps every invalid score
# strictly below exp(-sqrt(2)) ~ 0.2431, the worst possible score of a
# valid design parked at the far corner, so partial credit can never
# outrank a running robot.
INVALID_CREDIT_CAP_PARTS = 20


def invalid_score(report: ValidityReport) -> float:
    """Partial credit for a design that cannot run: 0.01 per correct part.

    A correct part is a module of a kind the task requires (sensors and
    wheels); the credit is capped below any valid episode score.
    """
    if report.valid:
        raise ValueError("invalid_score is only defined for invalid designs")
    return 0.01 * min(report.correct_parts, INVALID_CREDIT_CAP_PARTS)
