"""Fixed-capacity replay buffer with reservoir insertion and uniform sampling.

Reservoir sampling: the first M stream items fill the buffer; item number
t > M (1-indexed) replaces a uniformly drawn slot j in [0, t) when j < M.
Every stream item therefore ends up stored with probability M / t after t
items, independent of arrival order.

Single-writer: the trainer inserts between tasks and samples during
training; the two are never concurrent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .data import Sample


@dataclass
class ReplayBuffer:
    """Reservoir of raw (input, label, task) samples.

    Invariant: len(items) == min(capacity, seen_count).
    """

    capacity: int
    items: list[Sample] = field(default_factory=list)
    seen_count: int = 0

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError(f"capacity must be nonnegative, got {self.capacity}")

    def __len__(self) -> int:
        return len(self.items)


def reservoir_insert(buf: ReplayBuffer, sample: Sample, rng: np.random.Generator) -> ReplayBuffer:
    """Stream one sample into the buffer; returns the (mutated) buffer."""
    buf.seen_count += 1
    if len(buf.items) < buf.capacity:
        buf.items.append(sample)
    else:
        j = int(rng.integers(0, buf.seen_count))
        if j < buf.capacity:
            buf.items[j] = sample
    return buf


def sample(buf: ReplayBuffer, k: int, rng: np.random.Generator) -> list[Sample]:
    """Draw k samples uniformly with replacement.

    Raises:
        ValueError: if k > 0 and the buffer is empty.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if k == 0:
        return []
    if not buf.items:
        raise ValueError("cannot sample from an empty buffer")
    idx = rng.integers(0, len(buf.items), size=k)
    return [buf.items[int(i)] for i in idx]


def save(buf: ReplayBuffer, path) -> None:
    """Dump buffer contents to the TVMF-CKPT-1 checkpoint format."""
    tensors: dict[str, np.ndarray] = {
        "buffer.capacity": np.array(buf.capacity, dtype=np.int64),
        "buffer.seen_count": np.array(buf.seen_count, dtype=np.int64),
        "buffer.size": np.array(len(buf.items), dtype=np.int64),
    }
    if buf.items:
        tensors["buffer.inputs"] = np.stack([s.input for s in buf.items])
        tensors["buffer.labels"] = np.array([s.label for s in buf.items], dtype=np.int64)
        tensors["buffer.task_ids"] = np.array([s.task_id for s in buf.items], dtype=np.int64)
    checkpoint.write_tensors(path, tensors)


def load(path) -> ReplayBuffer:
    """Rebuild a buffer from a checkpoint written by :func:`save`."""
    tensors = checkpoint.read_tensors(path)
    buf = ReplayBuffer(capacity=int(tensors["buffer.capacity"]))
    buf.seen_count = int(tensors["buffer.seen_count"])
    size = int(tensors["buffer.size"])
    if size:
        inputs = tensors["buffer.inputs"]
        labels = tensors["buffer.labels"]
        task_ids = tensors["buffer.task_ids"]
        buf.items = [
            Sample(input=inputs[i], label=int(labels[i]), task_id=int(task_ids[i]))
            for i in range(size)
        ]
    return buf
