import numpy as np
import pytest

from ncrs.channels import (
    ChannelLayout,
    Task,
    genome_length,
    unpack_genome,
)


def test_layout_channel_counts():
    lc = ChannelLayout(n_type_channels=3)
    cbt = ChannelLayout(n_type_channels=4)
    assert lc.n_total == 12
    assert cbt.n_total == 13
    for layout in (lc, cbt):
        assert layout.n_total == 2 + layout.n_type_channels + layout.n_hidden + 1


def test_layout_indices():
    layout = ChannelLayout(n_type_channels=4)
    assert layout.body == 0
    assert layout.flag == 1
    assert list(layout.types) == [2, 3, 4, 5]
    assert layout.type_tissue == 2
    assert layout.type_light_sensor == 3
    assert layout.type_target_sensor == 4
    assert layout.type_wheel == 5
    assert list(layout.hidden) == [6, 7, 8, 9, 10, 11]
    assert layout.io == 12


def test_lc_layout_has_no_target_channel():
    with pytest.raises(ValueError):
        ChannelLayout(n_type_channels=3).type_target_sensor


def test_task_layouts():
    assert Task.LC.layout().n_total == 12
    assert Task.LCO.layout().n_total == 12
    assert Task.CBT.layout().n_total == 13
    assert Task.parse("cbt") is Task.CBT
    with pytest.raises(ValueError):
        Task.parse("nope")


@pytest.mark.parametrize(
    "n_type,expected",
    [(3, 4572), (4, 4873)],
)
def test_genome_length_published_counts(n_type, expected):
    assert genome_length(ChannelLayout(n_type_channels=n_type)) == expected


def test_genome_length_degenerate_single_channel():
    # Formula check with n_total = 1 and the same layer widths.
    class Stub:
        n_total = 1

    assert genome_length(Stub()) == 9 * 30 + 30 + 900 + 30 + 30 + 1 == 1261


def test_parameter_count_matches_unpacked_segments():
    for n_type in (3, 4):
        layout = ChannelLayout(n_type_channels=n_type)
        genome = np.arange(genome_length(layout), dtype=float)
        net = unpack_genome(genome, layout)
        total = sum(
            a.size
            for a in (net.conv_w, net.conv_b, net.dense1_w, net.dense1_b, net.dense2_w, net.dense2_b)
        )
        assert total == genome_length(layout)


def test_unpack_preserves_layout_order():
    layout = ChannelLayout(n_type_channels=3)
    genome = np.arange(genome_length(layout), dtype=float)
    net = unpack_genome(genome, layout)
    n = layout.n_total
    assert net.conv_w[0, 0] == 0.0
    assert net.conv_b[0] == 30 * 9 * n
    assert net.dense1_w[0, 0] == 30 * 9 * n + 30
    assert net.dense2_b[-1] == genome_length(layout) - 1


def test_unpack_rejects_bad_genomes():
    layout = ChannelLayout(n_type_channels=3)
    with pytest.raises(ValueError, match="length"):
        unpack_genome(np.zeros(10), layout)
    bad = np.zeros(genome_length(layout))
    bad[7] = np.nan
    with pytest.raises(ValueError, match="finite"):
        unpack_genome(bad, layout)
