"""Binary genome files.

Header: magic "NCRS", then little-endian u32 fields format version,
n_total, grid height, grid width, task id, activation id. Payload:
the parameters as little-endian float64 in the documented layout order
(conv weights, conv biases, dense-1 weights/biases, dense-2
weights/biases).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ncrs.channels import ACTIVATION_RELU, ChannelLayout, Task, genome_length

MAGIC = b"NCRS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIII")


class GenomeFileError(ValueError):
    pass


@dataclass
class GenomeFile:
    genome: np.ndarray
    layout: ChannelLayout
    task: Task
    dims: tuple[int, int]
    activation: int = ACTIVATION_RELU


def write_genome(path, genome: np.ndarray, task: Task, dims: tuple[int, int] = (5, 5),
                 activation: int = ACTIVATION_RELU) -> None:
    layout = task.layout()
    genome = np.asarray(genome, dtype=np.float64)
    if genome.shape != (genome_length(layout),):
        raise GenomeFileError(
            f"genome has {genome.size} parameters, task {task.name} needs "
            f"{genome_length(layout)}"
        )
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, layout.n_total, dims[0], dims[1], task.value, activation
    )
    payload = genome.astype("<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_genome(path) -> GenomeFile:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise GenomeFileError(f"{path}: truncated header")
    magic, version, n_total, height, width, task_id, activation = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise GenomeFileError(f"{path}: not a genome file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise GenomeFileError(f"{path}: unsupported format version {version}")
    try:
        task = Task(task_id)
    except ValueError:
        raise GenomeFileError(f"{path}: unknown task id {task_id}") from None
    layout = task.layout()
    if layout.n_total != n_total:
        raise GenomeFileError(
            f"{path}: task {task.name} implies {layout.n_total} channels, header says {n_total}"
        )
    expected = genome_length(layout)
    payload = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    if payload.size != expected:
        raise GenomeFileError(
            f"{path}: payload has {payload.size} parameters, expected {expected}"
        )
    return GenomeFile(
        genome=payload.astype(np.float64),
        layout=layout,
        task=task,
        dims=(height, width),
        activation=activation,
    )
