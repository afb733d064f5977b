"""Channel layout of the cellular grid and the flat genome that drives it.

Every cell carries ``n_total`` real values: a body channel, a control
flag, one channel per module type, six hidden channels and one
input/output channel. The genome is the flat parameter vector of the
three-layer update network (3x3 convolution -> dense -> dense) applied
identically at every cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

CONV_FILTERS = 30
DENSE_UNITS = 30

# Activation applied after the conv layer and after the first dense layer.
# Recorded in genome files so saved parameters stay interpretable.
ACTIVATION_RELU = 0
ACTIVATION_NAMES = {ACTIVATION_RELU: "relu"}


class Task(Enum):
    """Benchmark tasks. The task family fixes the channel layout."""

    LC = 0  # light chasing
    LCO = 1  # light chasing with obstacle
    CBT = 2  # carrying ball to target

    def layout(self) -> ChannelLayout:
        return ChannelLayout(n_type_channels=4 if self is Task.CBT else 3)

    @classmethod
    def parse(cls, name: str) -> Task:
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown task {name!r} (expected lc, lco or cbt)") from None


@dataclass(frozen=True)
class ChannelLayout:
    """Fixed channel indices for one task family.

    ``n_type_channels`` is 3 for the light-chasing tasks (tissue,
    light/ball sensor, wheel) and 4 for carrying-ball-to-target, which
    adds a target-area sensor between sensor and wheel.
    """

    n_type_channels: int = 3
    n_hidden: int = 6

    def __post_init__(self) -> None:
        if self.n_type_channels < 1:
            raise ValueError("need at least one module-type channel")
        if self.n_hidden < 0:
            raise ValueError("hidden channel count must be >= 0")

    @property
    def n_total(self) -> int:
        return 2 + self.n_type_channels + self.n_hidden + 1

    body = 0
    flag = 1

    @property
    def types(self) -> range:
        return range(2, 2 + self.n_type_channels)

    @property
    def hidden(self) -> range:
        start = 2 + self.n_type_channels
        return range(start, start + self.n_hidden)

    @property
    def io(self) -> int:
        return self.n_total - 1

    # Type-channel order: tissue, light/ball sensor, (target sensor), wheel.
    @property
    def type_tissue(self) -> int:
        return 2

    @property
    def type_light_sensor(self) -> int:
        return 3

    @property
    def type_target_sensor(self) -> int:
        if self.n_type_channels < 4:
            raise ValueError("layout has no target-sensor channel")
        return 4

    @property
    def type_wheel(self) -> int:
        return 2 + self.n_type_channels - 1


def genome_length(layout: ChannelLayout) -> int:
    """Number of parameters in the update network for ``layout``.

    Segments, in storage order: conv weights (filters x 3 x 3 x n_total),
    conv biases, dense-1 weights (in x out), dense-1 biases, dense-2
    weights (in x n_total), dense-2 biases.
    """
    n = layout.n_total
    return (
        CONV_FILTERS * 9 * n
        + CONV_FILTERS
        + DENSE_UNITS * DENSE_UNITS
        + DENSE_UNITS
        + DENSE_UNITS * n
        + n
    )


@dataclass
class GenomeNet:
    """Genome unpacked into the update network's weight arrays.

    All arrays are views into (or reshapes of) the flat genome; treat
    them as read-only.
    """

    conv_w: np.ndarray  # (CONV_FILTERS, 9 * n_total), patch laid out (dy, dx, channel)
    conv_b: np.ndarray  # (CONV_FILTERS,)
    dense1_w: np.ndarray  # (CONV_FILTERS, DENSE_UNITS)
    dense1_b: np.ndarray  # (DENSE_UNITS,)
    dense2_w: np.ndarray  # (DENSE_UNITS, n_total)
    dense2_b: np.ndarray  # (n_total,)
    layout: ChannelLayout = field(default_factory=ChannelLayout)


def unpack_genome(genome: np.ndarray, layout: ChannelLayout) -> GenomeNet:
    """Split a flat genome into the per-layer arrays of the update net."""
    genome = np.ascontiguousarray(genome, dtype=np.float64)
    if genome.ndim != 1 or genome.size != genome_length(layout):
        raise ValueError(
            f"genome length {genome.size} does not match layout "
            f"(expected {genome_length(layout)} for n_total={layout.n_total})"
        )
    if not np.all(np.isfinite(genome)):
        raise ValueError("genome contains non-finite entries")
    n = layout.n_total
    sizes = [
        CONV_FILTERS * 9 * n,
        CONV_FILTERS,
        DENSE_UNITS * DENSE_UNITS,
        DENSE_UNITS,
        DENSE_UNITS * n,
        n,
    ]
    offsets = np.cumsum([0] + sizes)
    seg = [genome[offsets[i] : offsets[i + 1]] for i in range(6)]
    return GenomeNet(
        conv_w=seg[0].reshape(CONV_FILTERS, 9 * n),
        conv_b=seg[1],
        dense1_w=seg[2].reshape(CONV_FILTERS, DENSE_UNITS),
        dense1_b=seg[3],
        dense2_w=seg[4].reshape(DENSE_UNITS, n),
        dense2_b=seg[5],
        layout=layout,
    )
