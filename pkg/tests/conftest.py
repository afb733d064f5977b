import numpy as np
import pytest

from ncrs.channels import ChannelLayout, genome_length
from ncrs.morphology import ModuleKind, Morphology

KIND_BY_CHAR = {
    "T": ModuleKind.TISSUE,
    "S": ModuleKind.LIGHT_BALL_SENSOR,
    "A": ModuleKind.TARGET_SENSOR,
    "W": ModuleKind.WHEEL,
}


@pytest.fixture
def layout_lc():
    return ChannelLayout(n_type_channels=3)


@pytest.fixture
def layout_cbt():
    return ChannelLayout(n_type_channels=4)


def random_genome(layout, scale=0.5, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, genome_length(layout))


def morphology_from_text(text, dims=(5, 5)):
    """Build a Morphology from the character-grid export format."""
    rows = [line.strip() for line in text.strip().splitlines()]
    cells = {}
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch != ".":
                cells[(r, c)] = KIND_BY_CHAR[ch]
    return Morphology(cells=cells, seed_cell=(dims[0] // 2, dims[1] // 2), grid_dims=dims)


def grid_from_morphology(morph, layout, body_value=1.0):
    """Post-development grid whose extraction reproduces ``morph``."""
    h, w = morph.grid_dims
    grid = np.zeros((h, w, layout.n_total))
    channel = {
        ModuleKind.TISSUE: layout.type_tissue,
        ModuleKind.LIGHT_BALL_SENSOR: layout.type_light_sensor,
        ModuleKind.WHEEL: layout.type_wheel,
    }
    if layout.n_type_channels == 4:
        channel[ModuleKind.TARGET_SENSOR] = layout.type_target_sensor
    for (r, c), kind in morph.cells.items():
        grid[r, c, layout.body] = body_value
        grid[r, c, channel[kind]] = 1.0
    return grid
