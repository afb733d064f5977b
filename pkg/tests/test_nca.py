import numpy as np
import pytest

from conftest import grid_from_morphology, morphology_from_text, random_genome
from ncrs.channels import ChannelLayout, genome_length, unpack_genome
from ncrs.nca import (
    FrozenSpec,
    alive_mask,
    control_tick,
    develop,
    nca_step,
    seed_state,
)


def test_seed_state_single_center_entry(layout_lc):
    grid = seed_state(layout_lc, (5, 5))
    assert grid.shape == (5, 5, 12)
    assert grid.sum() == 1.0
    assert grid[2, 2, layout_lc.body] == 1.0
    assert np.count_nonzero(grid) == 1


def test_seed_state_larger_grid(layout_lc):
    grid = seed_state(layout_lc, (7, 7))
    assert grid[3, 3, layout_lc.body] == 1.0
    assert grid.sum() == 1.0


def test_seed_state_rejects_even_dims(layout_lc):
    with pytest.raises(ValueError):
        seed_state(layout_lc, (4, 5))


def test_alive_mask_empty(layout_lc):
    grid = np.zeros((5, 5, 12))
    mask = alive_mask(grid, layout_lc)
    assert mask.mature.sum() == 0
    assert mask.updatable.sum() == 0


def test_alive_mask_seed_halo(layout_lc):
    mask = alive_mask(seed_state(layout_lc), layout_lc)
    assert mask.mature.sum() == 1
    assert mask.updatable.sum() == 9


def test_alive_mask_corner_clipping(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[0, 0, layout_lc.body] = 1.0
    mask = alive_mask(grid, layout_lc)
    assert mask.updatable.sum() == 4


def test_alive_threshold_is_strict(layout_lc):
    grid = np.zeros((5, 5, 12))
    grid[2, 2, layout_lc.body] = 0.1
    assert alive_mask(grid, layout_lc).mature.sum() == 0
    assert alive_mask(grid, layout_lc).updatable.sum() == 0


def test_updatable_contains_mature_randomized(layout_lc):
    rng = np.random.default_rng(4)
    for _ in range(50):
        grid = rng.uniform(-5, 5, (5, 5, 12))
        mask = alive_mask(grid, layout_lc)
        assert np.all(mask.updatable[mask.mature])


def test_zero_genome_is_identity(layout_lc):
    genome = np.zeros(genome_length(layout_lc))
    grid = seed_state(layout_lc)
    out = nca_step(grid, genome, layout_lc)
    np.testing.assert_array_equal(out, grid)


def test_dead_cells_keep_exact_zero(layout_lc):
    genome = random_genome(layout_lc, scale=1.0, seed=11)
    out = nca_step(seed_state(layout_lc), genome, layout_lc)
    mask = alive_mask(seed_state(layout_lc), layout_lc).updatable
    assert (~mask).sum() == 16
    assert np.all(out[~mask] == 0.0)


def test_boundedness_fuzz(layout_lc):
    rng = np.random.default_rng(99)
    for case in range(100):
        genome = rng.uniform(-10, 10, genome_length(layout_lc))
        grid = rng.uniform(-5, 5, (5, 5, 12))
        out = nca_step(grid, genome, layout_lc)
        assert out.min() >= -5.0 and out.max() <= 5.0, f"case {case}"


def test_dead_cell_immutability_fuzz(layout_lc):
    rng = np.random.default_rng(123)
    for _ in range(100):
        genome = rng.uniform(-2, 2, genome_length(layout_lc))
        grid = rng.uniform(-5, 5, (5, 5, 12))
        mask = alive_mask(grid, layout_lc).updatable
        out = nca_step(grid, genome, layout_lc)
        np.testing.assert_array_equal(out[~mask], grid[~mask])


def test_flag_immutability_fuzz(layout_lc):
    rng = np.random.default_rng(7)
    for flag_value in (0.0, 1.0):
        for _ in range(50):
            genome = rng.uniform(-2, 2, genome_length(layout_lc))
            grid = rng.uniform(-5, 5, (5, 5, 12))
            grid[:, :, layout_lc.flag] = flag_value
            out = nca_step(grid, genome, layout_lc)
            np.testing.assert_array_equal(out[:, :, layout_lc.flag], grid[:, :, layout_lc.flag])


def _reference_step_permuted(grid, genome, layout, rng):
    """Per-cell reference update visiting cells in a random order.

    Reads only the pre-step grid, so any visitation order must agree
    with the synchronous kernel.
    """
    net = unpack_genome(genome, layout)
    mask = alive_mask(grid, layout).updatable
    h, w, n = grid.shape
    out = grid.copy()
    cells = [(r, c) for r in range(h) for c in range(w) if mask[r, c]]
    rng.shuffle(cells)
    padded = np.zeros((h + 2, w + 2, n))
    padded[1:-1, 1:-1] = grid
    for r, c in cells:
        patch = padded[r : r + 3, c : c + 3, :].reshape(-1)
        a = np.maximum(net.conv_w @ patch + net.conv_b, 0.0)
        a = np.maximum(a @ net.dense1_w + net.dense1_b, 0.0)
        delta = a @ net.dense2_w + net.dense2_b
        out[r, c] = np.clip(grid[r, c] + delta, -5.0, 5.0)
    out[:, :, layout.flag] = grid[:, :, layout.flag]
    return out


def test_synchronous_update_order_independence(layout_lc):
    rng = np.random.default_rng(21)
    for _ in range(20):
        genome = rng.uniform(-1, 1, genome_length(layout_lc))
        grid = rng.uniform(-5, 5, (5, 5, 12))
        expected = _reference_step_permuted(grid, genome, layout_lc, rng)
        out = nca_step(grid, genome, layout_lc)
        np.testing.assert_allclose(out, expected, atol=1e-10)


def test_step_determinism(layout_lc):
    genome = random_genome(layout_lc, seed=5)
    grid = np.random.default_rng(5).uniform(-5, 5, (5, 5, 12))
    np.testing.assert_array_equal(
        nca_step(grid, genome, layout_lc), nca_step(grid, genome, layout_lc)
    )


def test_step_rejects_wrong_genome_length(layout_lc):
    with pytest.raises(ValueError):
        nca_step(seed_state(layout_lc), np.zeros(100), layout_lc)


def test_develop_zero_genome_stays_seed(layout_lc):
    genome = np.zeros(genome_length(layout_lc))
    np.testing.assert_array_equal(develop(genome, layout_lc), seed_state(layout_lc))


def test_develop_is_ten_explicit_steps(layout_lc):
    genome = random_genome(layout_lc, seed=3)
    grid = seed_state(layout_lc)
    for _ in range(10):
        grid = nca_step(grid, genome, layout_lc)
    np.testing.assert_array_equal(develop(genome, layout_lc), grid)


def test_develop_deterministic(layout_lc):
    genome = random_genome(layout_lc, seed=8)
    np.testing.assert_array_equal(develop(genome, layout_lc), develop(genome, layout_lc))


def test_develop_growth_cone(layout_lc):
    # On a large grid, cells mature after step t must lie within
    # Chebyshev distance t of the center: growth spreads one ring per step.
    rng = np.random.default_rng(17)
    size = 25
    center = size // 2
    rows, cols = np.indices((size, size))
    cheb = np.maximum(np.abs(rows - center), np.abs(cols - center))
    for _ in range(10):
        genome = rng.uniform(-3, 3, genome_length(layout_lc))
        grid = seed_state(layout_lc, (size, size))
        for t in range(1, 11):
            grid = nca_step(grid, genome, layout_lc)
            mature = alive_mask(grid, layout_lc).mature
            assert not np.any(mature & (cheb > t)), f"leak outside cone at step {t}"


def test_develop_control_flag_stays_zero(layout_lc):
    genome = random_genome(layout_lc, seed=13)
    grown = develop(genome, layout_lc)
    assert np.all(grown[:, :, layout_lc.flag] == 0.0)


def test_frozen_cells_restored(layout_lc):
    genome = random_genome(layout_lc, seed=2)
    grid = np.random.default_rng(2).uniform(-5, 5, (5, 5, 12))
    frozen = FrozenSpec(channels=(layout_lc.flag,), cells=((1, 1, 3), (4, 0, 11)))
    out = nca_step(grid, genome, layout_lc, frozen)
    assert out[1, 1, 3] == grid[1, 1, 3]
    assert out[4, 0, 11] == grid[4, 0, 11]


# -- control phase -----------------------------------------------------------

CROSS = """
.T.
STW
.W.
"""


def _control_setup(layout):
    from ncrs.env import control_grid_for

    morph = morphology_from_text(CROSS, dims=(3, 3))
    grid = control_grid_for(morph, layout)
    return morph, grid


def test_control_tick_zero_genome_zero_commands(layout_lc):
    morph, grid = _control_setup(layout_lc)
    genome = np.zeros(genome_length(layout_lc))
    _, commands = control_tick(grid, genome, morph, {(1, 0): 0.7}, layout_lc)
    assert set(commands) == {(1, 2), (2, 1)}
    assert all(v == 0.0 for v in commands.values())


def test_control_tick_actuator_clipping(layout_lc):
    # A dense-2 io bias of 1.85 accumulates to 3.7 after two updates;
    # the emitted command must saturate at 1.0.
    morph, grid = _control_setup(layout_lc)
    genome = np.zeros(genome_length(layout_lc))
    net = unpack_genome(genome, layout_lc)
    net.dense2_b[layout_lc.io] = 1.85
    out_grid, commands = control_tick(grid, genome, morph, {(1, 0): 0.0}, layout_lc)
    wheel = (1, 2)
    assert out_grid[wheel[0], wheel[1], layout_lc.io] == pytest.approx(3.7)
    assert commands[wheel] == 1.0


def test_control_tick_deterministic(layout_lc):
    morph, grid = _control_setup(layout_lc)
    genome = random_genome(layout_lc, seed=31)
    g1, c1 = control_tick(grid, genome, morph, {(1, 0): 0.5}, layout_lc)
    g2, c2 = control_tick(grid, genome, morph, {(1, 0): 0.5}, layout_lc)
    np.testing.assert_array_equal(g1, g2)
    assert c1 == c2


def test_control_tick_does_not_mutate_input(layout_lc):
    morph, grid = _control_setup(layout_lc)
    before = grid.copy()
    control_tick(grid, random_genome(layout_lc, seed=1), morph, {(1, 0): 0.9}, layout_lc)
    np.testing.assert_array_equal(grid, before)


def test_control_tick_sensor_key_mismatch(layout_lc):
    morph, grid = _control_setup(layout_lc)
    genome = np.zeros(genome_length(layout_lc))
    with pytest.raises(ValueError, match="sensor"):
        control_tick(grid, genome, morph, {(0, 0): 0.5}, layout_lc)
    with pytest.raises(ValueError, match="sensor"):
        control_tick(grid, genome, morph, {}, layout_lc)


def test_control_tick_preserves_body_and_types(layout_lc):
    morph, grid = _control_setup(layout_lc)
    genome = random_genome(layout_lc, seed=77)
    out, _ = control_tick(grid, genome, morph, {(1, 0): 0.3}, layout_lc)
    fixed = [layout_lc.body, layout_lc.flag, *layout_lc.types]
    np.testing.assert_array_equal(out[:, :, fixed], grid[:, :, fixed])


def test_control_tick_pins_sensor_io(layout_lc):
    morph, grid = _control_setup(layout_lc)
    genome = random_genome(layout_lc, seed=78)
    out, _ = control_tick(grid, genome, morph, {(1, 0): 0.42}, layout_lc)
    assert out[1, 0, layout_lc.io] == 0.42
