"""Task streams: synthetic class clusters, CIFAR-10 binary loading, two-view augmentation.

A task stream is an ordered list of tasks with pairwise-disjoint class
sets; the standard layout is 5 tasks of 2 classes each. The synthetic
generator is the default experiment substrate (runs in seconds, no
downloads); the CIFAR-10 binary loader covers full-scale runs but its
accuracy figures are not verified at desk scale.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 32 * 32 pixel bytes
CIFAR_IMAGE_SHAPE = (3, 32, 32)

TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
TEST_FILE = "test_batch.bin"


@dataclass
class Sample:
    """One data point: input vector, class label, originating task."""

    input: np.ndarray
    label: int
    task_id: int


@dataclass
class Task:
    """A task's class set plus its train/test samples."""

    class_ids: tuple[int, ...]
    train: list[Sample]
    test: list[Sample]


@dataclass
class TaskStream:
    """Ordered tasks with disjoint class sets."""

    tasks: list[Task]

    def __post_init__(self):
        seen: set[int] = set()
        for task in self.tasks:
            overlap = seen.intersection(task.class_ids)
            if overlap:
                raise ValueError(f"classes {sorted(overlap)} appear in multiple tasks")
            seen.update(task.class_ids)

    @property
    def n_classes(self) -> int:
        return sum(len(t.class_ids) for t in self.tasks)

    @property
    def input_dim(self) -> int:
        return int(self.tasks[0].train[0].input.shape[0])


@dataclass
class AugmentConfig:
    """Two-view augmentation strengths.

    Vector mode (default): additive Gaussian noise (``noise_sigma``) plus a
    per-coordinate sign-preserving scale drawn uniformly from
    [1 - scale_jitter, 1 + scale_jitter].

    Image mode (``image_shape`` set, e.g. (3, 32, 32)): zero-pad each
    spatial edge by ``crop_padding``, crop back at a random offset,
    horizontally flip with probability ``flip_prob``, then add Gaussian
    noise. With every strength at zero both modes return the input
    unchanged.
    """

    noise_sigma: float = 0.1
    scale_jitter: float = 0.1
    crop_padding: int = 0
    flip_prob: float = 0.0
    image_shape: tuple[int, int, int] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        if self.scale_jitter < 0:
            raise ValueError("scale jitter must be nonnegative")
        if self.crop_padding < 0:
            raise ValueError("crop padding must be nonnegative")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip probability must lie in [0, 1]")


def synthetic_stream(
    seed: int,
    n_classes: int = 10,
    dim: int = 32,
    per_class: int = 40,
    spread: float = 0.3,
) -> TaskStream:
    """Generate Gaussian class clusters, paired into 2-class tasks.

    Each class gets a random unit mean direction; its points are that mean
    plus isotropic Gaussian noise scaled by ``spread`` (spread 0 collapses
    the class to a single point). Classes (0,1), (2,3), ... form the tasks
    in order and each class is split 80/20 into train/test. Everything is
    deterministic per seed.
    """
    if n_classes < 2 or n_classes % 2 != 0:
        raise ValueError(f"n_classes must be even and >= 2, got {n_classes}")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if per_class < 2:
        raise ValueError(f"per_class must be >= 2, got {per_class}")
    if spread < 0:
        raise ValueError(f"spread must be nonnegative, got {spread}")

    rng = np.random.default_rng(seed)
    n_test = max(1, per_class // 5)
    n_train = per_class - n_test

    tasks = []
    for task_id in range(n_classes // 2):
        class_ids = (2 * task_id, 2 * task_id + 1)
        train: list[Sample] = []
        test: list[Sample] = []
        for label in class_ids:
            direction = rng.normal(size=dim)
            direction /= np.linalg.norm(direction)
            points = direction[None, :] + spread * rng.normal(size=(per_class, dim))
            for row in points[:n_train]:
                train.append(Sample(input=row, label=label, task_id=task_id))
            for row in points[n_train:]:
                test.append(Sample(input=row, label=label, task_id=task_id))
        tasks.append(Task(class_ids=class_ids, train=train, test=test))
    return TaskStream(tasks=tasks)


def parse_cifar_record(buf: bytes, offset: int) -> tuple[int, np.ndarray]:
    """Decode one 3073-byte CIFAR-10 record at ``offset``.

    Returns:
        (label, pixels) with pixels as a flat uint8 array of 3072 values.

    Raises:
        ValueError: on truncation (reports the byte offset) or a label
            outside 0..9.
    """
    end = offset + CIFAR_RECORD_BYTES
    if end > len(buf):
        raise ValueError(
            f"truncated CIFAR-10 record at byte offset {offset}: "
            f"need {CIFAR_RECORD_BYTES} bytes, have {len(buf) - offset}"
        )
    label = buf[offset]
    if label > 9:
        raise ValueError(f"invalid label {label} at byte offset {offset}")
    pixels = np.frombuffer(buf, dtype=np.uint8, count=3072, offset=offset + 1)
    return label, pixels


def serialize_cifar_record(label: int, pixels: np.ndarray) -> bytes:
    """Inverse of :func:`parse_cifar_record`; reproduces the original bytes."""
    if not 0 <= label <= 9:
        raise ValueError(f"invalid label {label}")
    pixels = np.asarray(pixels, dtype=np.uint8).ravel()
    if pixels.size != 3072:
        raise ValueError(f"expected 3072 pixel bytes, got {pixels.size}")
    return bytes([label]) + pixels.tobytes()


def task_of_class(label: int) -> int:
    """Fixed class-to-task rule: classes (2t, 2t+1) belong to task t."""
    return label // 2


def _read_records(path: Path) -> tuple[np.ndarray, np.ndarray]:
    buf = path.read_bytes()
    if len(buf) % CIFAR_RECORD_BYTES != 0:
        raise ValueError(
            f"{path}: size {len(buf)} is not a multiple of {CIFAR_RECORD_BYTES}; "
            f"trailing fragment starts at byte offset "
            f"{len(buf) - len(buf) % CIFAR_RECORD_BYTES}"
        )
    labels = []
    pixels = []
    for offset in range(0, len(buf), CIFAR_RECORD_BYTES):
        label, pix = parse_cifar_record(buf, offset)
        labels.append(label)
        pixels.append(pix)
    return np.array(labels, dtype=np.int64), np.stack(pixels)


def load_cifar10_binary(path) -> TaskStream:
    """Load the CIFAR-10 binary batches under ``path`` as a 5-task stream.

    Pixels are scaled to [0, 1] and normalized per channel with mean/std
    computed over the training batches. Classes {0,1}, {2,3}, {4,5},
    {6,7}, {8,9} map to tasks in order.
    """
    root = Path(path)
    train_labels = []
    train_pixels = []
    for name in TRAIN_FILES:
        f = root / name
        if not f.exists():
            raise ValueError(f"missing CIFAR-10 batch file: {f}")
        labels, pixels = _read_records(f)
        train_labels.append(labels)
        train_pixels.append(pixels)
    test_file = root / TEST_FILE
    if not test_file.exists():
        raise ValueError(f"missing CIFAR-10 batch file: {test_file}")
    test_labels, test_pixels = _read_records(test_file)

    train_labels = np.concatenate(train_labels)
    train_pixels = np.concatenate(train_pixels)

    def to_float(pixels: np.ndarray) -> np.ndarray:
        return pixels.astype(np.float64).reshape(-1, *CIFAR_IMAGE_SHAPE) / 255.0

    train_x = to_float(train_pixels)
    test_x = to_float(test_pixels)
    mean = train_x.mean(axis=(0, 2, 3))
    std = train_x.std(axis=(0, 2, 3))
    std[std == 0] = 1.0

    def normalize(x: np.ndarray) -> np.ndarray:
        return ((x - mean[None, :, None, None]) / std[None, :, None, None]).reshape(
            x.shape[0], -1
        )

    train_x = normalize(train_x)
    test_x = normalize(test_x)

    tasks = []
    for task_id in range(5):
        class_ids = (2 * task_id, 2 * task_id + 1)
        tr_mask = np.isin(train_labels, class_ids)
        te_mask = np.isin(test_labels, class_ids)
        train = [
            Sample(input=train_x[i], label=int(train_labels[i]), task_id=task_id)
            for i in np.nonzero(tr_mask)[0]
        ]
        test = [
            Sample(input=test_x[i], label=int(test_labels[i]), task_id=task_id)
            for i in np.nonzero(te_mask)[0]
        ]
        tasks.append(Task(class_ids=class_ids, train=train, test=test))
    return TaskStream(tasks=tasks)


def resolve_data_dir(path: str | None) -> str:
    """Dataset directory from config, falling back to $TVMF_CL_DATA_DIR."""
    if path:
        return path
    env = os.environ.get("TVMF_CL_DATA_DIR", "")
    if env:
        return env
    raise ValueError("no dataset path given and TVMF_CL_DATA_DIR is not set")


def _augment_vector(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    out = x.copy()
    if cfg.scale_jitter > 0:
        out = out * rng.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter, size=out.shape)
    if cfg.noise_sigma > 0:
        out = out + cfg.noise_sigma * rng.normal(size=out.shape)
    return out


def _augment_image(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    c, h, w = cfg.image_shape
    img = x.reshape(c, h, w)
    if cfg.crop_padding > 0:
        p = cfg.crop_padding
        padded = np.zeros((c, h + 2 * p, w + 2 * p), dtype=img.dtype)
        padded[:, p : p + h, p : p + w] = img
        top = int(rng.integers(0, 2 * p + 1))
        left = int(rng.integers(0, 2 * p + 1))
        img = padded[:, top : top + h, left : left + w]
    if cfg.flip_prob > 0 and rng.random() < cfg.flip_prob:
        img = img[:, :, ::-1]
    out = img.reshape(-1).copy()
    if cfg.noise_sigma > 0:
        out = out + cfg.noise_sigma * rng.normal(size=out.shape)
    return out


def two_views(sample: Sample, cfg: AugmentConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw two independent augmentations of one sample.

    Deterministic given the rng state; labels are preserved by construction.
    """
    aug = _augment_image if cfg.image_shape is not None else _augment_vector
    return aug(sample.input, cfg, rng), aug(sample.input, cfg, rng)


def derived_rng(run_seed: int, *context: int) -> np.random.Generator:
    """Independent per-context rng stream (e.g. per task/epoch/sample)."""
    return np.random.default_rng(np.random.SeedSequence((run_seed, *context)))
