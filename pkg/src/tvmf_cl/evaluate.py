"""Linear-probe evaluation: class-incremental and task-incremental accuracy.

The probe is a multinomial logistic regression trained by full-batch
gradient descent on frozen encoder features. Its training set is the
final task's train samples plus the replay buffer contents, resampled so
each class contributes equally. Class-IL scores argmax over all class
logits; task-IL restricts the argmax to the classes of each test sample's
own task and averages the per-task accuracies.

Evaluation is read-only over the encoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import encoder as enc
from .data import Sample, TaskStream
from .encoder import EncoderNet


@dataclass
class LinearProbe:
    """Linear classifier over frozen features: logits = x @ W.T + b."""

    W: np.ndarray  # (n_classes, feature_dim)
    b: np.ndarray  # (n_classes,)

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]


@dataclass
class SeedResult:
    """Per-seed evaluation outcome plus the training loss trace."""

    seed: int
    class_il: float
    task_il: float
    per_task: list[float]
    loss_log: list[tuple[int, int, float]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "class_il": self.class_il,
            "task_il": self.task_il,
            "per_task": list(self.per_task),
        }


@dataclass
class RunMetrics:
    """Aggregate over seeds: mean and sample standard deviation."""

    per_seed: list[SeedResult]
    class_il_mean: float
    class_il_std: float
    task_il_mean: float
    task_il_std: float
    per_task_mean: list[float]

    @classmethod
    def aggregate(cls, results: list[SeedResult]) -> "RunMetrics":
        if not results:
            raise ValueError("no seed results to aggregate")

        def mean_std(values):
            arr = np.array(values, dtype=np.float64)
            std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
            return float(np.mean(arr)), std

        c_mean, c_std = mean_std([r.class_il for r in results])
        t_mean, t_std = mean_std([r.task_il for r in results])
        per_task = np.mean([r.per_task for r in results], axis=0)
        return cls(
            per_seed=results,
            class_il_mean=c_mean,
            class_il_std=c_std,
            task_il_mean=t_mean,
            task_il_std=t_std,
            per_task_mean=[float(v) for v in per_task],
        )

    def to_json_dict(self) -> dict:
        return {
            "per_seed": [r.to_json_dict() for r in self.per_seed],
            "aggregate": {
                "class_il_mean": self.class_il_mean,
                "class_il_std": self.class_il_std,
                "task_il_mean": self.task_il_mean,
                "task_il_std": self.task_il_std,
                "per_task_mean": self.per_task_mean,
            },
        }


def _features(net: EncoderNet, samples: list[Sample], on_embedding: bool) -> np.ndarray:
    x = np.stack([s.input for s in samples])
    rep, emb = enc.forward(net, x)
    return emb if on_embedding else rep


def class_balanced_resample(
    samples: list[Sample], rng: np.random.Generator
) -> list[Sample]:
    """Resample to the minimum class count so classes contribute equally.

    Classes are processed in sorted label order and within a class the
    subset is drawn without replacement, so the result is deterministic
    per rng state.
    """
    by_label: dict[int, list[Sample]] = {}
    for s in samples:
        by_label.setdefault(s.label, []).append(s)
    min_count = min(len(v) for v in by_label.values())
    balanced: list[Sample] = []
    for label in sorted(by_label):
        group = by_label[label]
        if len(group) > min_count:
            keep = rng.choice(len(group), size=min_count, replace=False)
            group = [group[int(i)] for i in sorted(keep)]
        balanced.extend(group)
    return balanced


def fit_probe(
    net: EncoderNet,
    samples: list[Sample],
    epochs: int,
    lr: float,
    n_classes: int,
    rng: np.random.Generator | None = None,
    on_embedding: bool = False,
) -> LinearProbe:
    """Train a linear probe on frozen features via full-batch gradient descent.

    Args:
        net: Frozen encoder (never mutated).
        samples: Probe training set; must contain every class in
            range(n_classes).
        epochs: Full-batch gradient steps.
        lr: Step size (0 leaves the zero-initialized probe untouched).
        n_classes: Total class count across all tasks.
        rng: Source for the class-balanced resampling; defaults to a fixed
            stream.
        on_embedding: Probe the projected embedding instead of the pre-head
            representation.

    Raises:
        ValueError: listing any classes missing from the probe set.
    """
    if not samples:
        raise ValueError("probe training set is empty")
    present = {s.label for s in samples}
    missing = sorted(set(range(n_classes)) - present)
    if missing:
        raise ValueError(f"probe training set is missing classes {missing}")
    if rng is None:
        rng = np.random.default_rng(0)

    balanced = class_balanced_resample(samples, rng)
    feats = _features(net, balanced, on_embedding)
    labels = np.array([s.label for s in balanced], dtype=np.int64)
    n, dim = feats.shape

    probe = LinearProbe(W=np.zeros((n_classes, dim)), b=np.zeros(n_classes))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0
    for _ in range(epochs):
        logits = feats @ probe.W.T + probe.b
        logits -= logits.max(axis=1, keepdims=True)
        expl = np.exp(logits)
        softmax = expl / expl.sum(axis=1, keepdims=True)
        delta = (softmax - onehot) / n
        probe.W -= lr * (delta.T @ feats)
        probe.b -= lr * delta.sum(axis=0)
    return probe


def _predict_logits(
    net: EncoderNet, probe: LinearProbe, samples: list[Sample], on_embedding: bool
) -> np.ndarray:
    feats = _features(net, samples, on_embedding)
    return feats @ probe.W.T + probe.b


def class_il_accuracy(
    net: EncoderNet,
    probe: LinearProbe,
    stream: TaskStream,
    on_embedding: bool = False,
) -> float:
    """Accuracy over the union of all test sets, argmax over every class."""
    correct = 0
    total = 0
    for task in stream.tasks:
        logits = _predict_logits(net, probe, task.test, on_embedding)
        pred = np.argmax(logits, axis=1)
        labels = np.array([s.label for s in task.test])
        correct += int(np.sum(pred == labels))
        total += len(task.test)
    return correct / total


def per_task_accuracy(
    net: EncoderNet,
    probe: LinearProbe,
    stream: TaskStream,
    on_embedding: bool = False,
) -> list[float]:
    """Class-IL-style accuracy computed separately on each task's test set."""
    out = []
    for task in stream.tasks:
        logits = _predict_logits(net, probe, task.test, on_embedding)
        pred = np.argmax(logits, axis=1)
        labels = np.array([s.label for s in task.test])
        out.append(float(np.mean(pred == labels)))
    return out


def task_il_accuracy(
    net: EncoderNet,
    probe: LinearProbe,
    stream: TaskStream,
    on_embedding: bool = False,
) -> float:
    """Mean over tasks of accuracy with logits masked to each task's classes."""
    accs = []
    for task in stream.tasks:
        logits = _predict_logits(net, probe, task.test, on_embedding)
        cols = np.array(task.class_ids)
        pred = cols[np.argmax(logits[:, cols], axis=1)]
        labels = np.array([s.label for s in task.test])
        accs.append(float(np.mean(pred == labels)))
    return float(np.mean(accs))
