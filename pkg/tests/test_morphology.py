import numpy as np
import pytest

from conftest import grid_from_morphology, morphology_from_text
from ncrs.channels import Task
from ncrs.morphology import (
    INVALID_CREDIT_CAP_PARTS,
    ModuleKind,
    extract_body,
    invalid_score,
    validate,
)
from ncrs.nca import ALIVE_THRESHOLD


def test_tied_type_channels_give_tissue(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[2, 2, layout_lc.body] = 1.0
    grid[2, 2, list(layout_lc.types)] = 0.7  # all equal
    morph = extract_body(grid, layout_lc)
    assert morph.cells[(2, 2)] is ModuleKind.TISSUE


def test_partial_ties_pick_lowest_index(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[2, 2, layout_lc.body] = 1.0
    grid[2, 2, layout_lc.type_light_sensor] = 0.9
    grid[2, 2, layout_lc.type_wheel] = 0.9
    morph = extract_body(grid, layout_lc)
    assert morph.cells[(2, 2)] is ModuleKind.LIGHT_BALL_SENSOR


def test_body_threshold_is_strict(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[2, 2, layout_lc.body] = ALIVE_THRESHOLD  # exactly 0.1: dead
    assert len(extract_body(grid, layout_lc)) == 0
    grid[2, 2, layout_lc.body] = 0.05
    assert len(extract_body(grid, layout_lc)) == 0
    grid[2, 2, layout_lc.body] = 0.11
    assert len(extract_body(grid, layout_lc)) == 1


def test_disconnected_cells_pruned(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[2, 2, layout_lc.body] = 1.0
    grid[0, 0, layout_lc.body] = 1.0  # isolated corner
    morph = extract_body(grid, layout_lc)
    assert len(morph) == 1
    assert (0, 0) not in morph.cells


def test_diagonal_neighbors_are_not_connected(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[2, 2, layout_lc.body] = 1.0
    grid[1, 1, layout_lc.body] = 1.0  # diagonal only
    assert len(extract_body(grid, layout_lc)) == 1


def test_dead_seed_gives_empty_morphology(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[0, 1, layout_lc.body] = 1.0  # alive, but seed cell is dead
    assert len(extract_body(grid, layout_lc)) == 0


def test_extract_is_pure(layout_lc):
    rng = np.random.default_rng(3)
    grid = rng.uniform(-5, 5, (5, 5, 12))
    m1 = extract_body(grid, layout_lc)
    m2 = extract_body(grid, layout_lc)
    assert m1.cells == m2.cells


def _assert_connected(morph):
    if not morph.cells:
        return
    seen = {morph.seed_cell}
    stack = [morph.seed_cell]
    while stack:
        r, c = stack.pop()
        for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if nb in morph.cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    assert seen == set(morph.cells)


def test_extracted_morphology_always_connected(layout_lc):
    rng = np.random.default_rng(10)
    for _ in range(100):
        grid = rng.uniform(-1, 1, (5, 5, 12))
        morph = extract_body(grid, layout_lc)
        _assert_connected(morph)
        if morph.cells:
            assert morph.seed_cell in morph.cells


def test_counts_match_kind_sets(layout_lc):
    morph = morphology_from_text(
        """
        .S...
        TWWT.
        .TT..
        ..W..
        .....
        """
    )
    assert morph.sensors_light == 1
    assert morph.wheels == 3
    assert morph.tissue == 4
    assert len(morph) == 8


def test_to_text_round_trip(layout_lc):
    text = ".S.\nTWW\n.T."
    morph = morphology_from_text(text, dims=(3, 3))
    assert morph.to_text() == text
    grid = grid_from_morphology(morph, layout_lc)
    assert extract_body(grid, layout_lc).cells == morph.cells


# -- validity ---------------------------------------------------------------


def test_lc_no_sensor_three_wheels(layout_lc):
    morph = morphology_from_text(".....\n.WWW.\n..T..\n.....\n.....")
    report = validate(morph, Task.LC)
    assert not report.valid
    assert report.satisfied_slots == 2
    assert report.required_slots == 3
    assert report.correct_parts == 3


def test_lc_minimal_valid():
    morph = morphology_from_text(".....\n.SWW.\nTTTTT\n.....\n.....")
    report = validate(morph, Task.LC)
    assert report.valid
    assert report.satisfied_slots == report.required_slots == 3


def test_cbt_missing_target_sensor():
    morph = morphology_from_text(".....\n.SWW.\n..T..\n.....\n.....")
    report = validate(morph, Task.CBT)
    assert not report.valid
    assert report.satisfied_slots == 3
    assert report.required_slots == 4


def test_cbt_valid_with_both_sensor_kinds():
    morph = morphology_from_text(".....\n.SAW.\n..W..\n.....\n.....")
    report = validate(morph, Task.CBT)
    assert report.valid
    assert report.satisfied_slots == 4


def test_lc_rejects_target_sensors():
    morph = morphology_from_text("..A..\n..W..\n..W..\n.....\n.....")
    with pytest.raises(ValueError, match="target"):
        validate(morph, Task.LC)


# -- partial credit ----------------------------------------------------------


def test_invalid_score_examples():
    zero = validate(morphology_from_text("..T..\n.....\n.....\n.....\n....."), Task.LC)
    assert invalid_score(zero) == 0.0
    one_each = validate(morphology_from_text(".SW..\n.....\n.....\n.....\n....."), Task.LC)
    assert invalid_score(one_each) == pytest.approx(0.02)
    cbt = validate(morphology_from_text(".SAW.\n.....\n.....\n.....\n....."), Task.CBT)
    assert invalid_score(cbt) == pytest.approx(0.03)


def test_invalid_score_counts_parts_beyond_slots():
    # Per-part credit: three wheels earn more than two, so growth of
    # useful parts is rewarded even before the design becomes valid.
    three_wheels = validate(morphology_from_text(".WWW.\n.....\n.....\n.....\n....."), Task.LC)
    assert invalid_score(three_wheels) == pytest.approx(0.03)


def test_invalid_score_cap_below_any_valid_fitness():
    wall_of_wheels = morphology_from_text("WWWWW\nWWWWW\nWWWWW\nWWWWW\nWWWWW")
    report = validate(wall_of_wheels, Task.LC)
    assert not report.valid  # no sensor
    score = invalid_score(report)
    assert score == pytest.approx(0.01 * INVALID_CREDIT_CAP_PARTS)
    # Worst valid design ever: parked at the opposite corner the whole run.
    min_valid_fitness = np.exp(-np.sqrt(2.0))
    assert score < min_valid_fitness


def test_invalid_score_rejects_valid_reports():
    report = validate(morphology_from_text(".SWW.\n.....\n.....\n.....\n....."), Task.LC)
    assert report.valid
    with pytest.raises(ValueError):
        invalid_score(report)
