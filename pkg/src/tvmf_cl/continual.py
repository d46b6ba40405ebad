"""Sequential task training with current-task anchors and buffer replay.

Per minibatch the trainer composes two views of each current sample and
of each replayed sample, encodes all views, and backpropagates the
asymmetric supervised contrastive loss. Only current-task views become
anchors; replayed views enter the contrast (and positive) sets. The
replay buffer is updated once per completed task by streaming that
task's train samples through reservoir insertion, so replay always
draws from strictly earlier tasks.

All randomness flows through named per-seed streams, so a (seed,
config, stream) triple reproduces bitwise-identical metrics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import buffer as replay
from . import encoder as enc
from . import evaluate
from .buffer import ReplayBuffer
from .data import AugmentConfig, Sample, Task, TaskStream, two_views
from .encoder import EncoderNet, SgdConfig, SgdOptimizer
from .evaluate import RunMetrics, SeedResult
from .loss import ContrastiveBatch, LossConfig, asym_supcon_loss_backward

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Everything a full multi-seed experiment needs.

    Desk defaults: 32 current + 32 replayed samples per minibatch
    (full-scale batches are out of scope), buffer capacity 200.
    """

    sgd: SgdConfig = field(default_factory=SgdConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    hidden_dims: list[int] = field(default_factory=lambda: [32])
    representation_dim: int = 16
    projection_dim: int = 16
    epochs_per_task: int = 5
    batch_current: int = 32
    batch_replay: int = 32
    buffer_capacity: int = 200
    probe_epochs: int = 300
    probe_lr: float = 0.5
    probe_on_embedding: bool = False
    seeds: list[int] = field(default_factory=lambda: [0])

    def __post_init__(self):
        if self.batch_current < 1:
            raise ValueError("batch_current must be >= 1")
        if self.batch_replay < 0:
            raise ValueError("batch_replay must be >= 0")
        if self.epochs_per_task < 0:
            raise ValueError("epochs_per_task must be >= 0")
        if self.buffer_capacity < 0:
            raise ValueError("buffer_capacity must be >= 0")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def encoder_dims(self, input_dim: int) -> tuple[list[int], list[int]]:
        trunk = [input_dim, *self.hidden_dims, self.representation_dim]
        head = [self.representation_dim, self.projection_dim, self.projection_dim]
        return trunk, head


@dataclass
class ComposedBatch:
    """Raw view inputs ready for encoding: two views per source sample.

    Current samples come first (views 2k, 2k+1 of current sample k) and
    ``anchors`` covers exactly those view indices.
    """

    inputs: np.ndarray
    labels: np.ndarray
    anchors: np.ndarray
    n_current: int
    n_replayed: int


@dataclass
class TrainerState:
    """Mutable state owned by one training run."""

    net: EncoderNet
    buffer: ReplayBuffer
    optimizer: SgdOptimizer
    task_index: int = 0
    loss_history: list[tuple[int, int, float]] = field(default_factory=list)
    rngs: dict[str, np.random.Generator] = field(default_factory=dict)


def compose_batch(
    current: list[Sample],
    replayed: list[Sample],
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> ComposedBatch:
    """Two views per sample, current first; anchors mark current views only."""
    if not current:
        raise ValueError("need at least one current sample")
    views = []
    labels = []
    for s in list(current) + list(replayed):
        v1, v2 = two_views(s, cfg, rng)
        views.extend((v1, v2))
        labels.extend((s.label, s.label))
    return ComposedBatch(
        inputs=np.stack(views),
        labels=np.array(labels, dtype=np.int64),
        anchors=np.arange(2 * len(current)),
        n_current=len(current),
        n_replayed=len(replayed),
    )


def init_trainer(seed: int, input_dim: int, cfg: RunConfig) -> TrainerState:
    """Fresh net, buffer, optimizer and named rng streams for one seed."""
    trunk_dims, head_dims = cfg.encoder_dims(input_dim)
    net = enc.init(seed, trunk_dims, head_dims)
    streams = ("shuffle", "augment", "replay", "buffer", "probe")
    children = np.random.SeedSequence(seed).spawn(len(streams))
    rngs = {name: np.random.default_rng(ss) for name, ss in zip(streams, children)}
    return TrainerState(
        net=net,
        buffer=ReplayBuffer(capacity=cfg.buffer_capacity),
        optimizer=SgdOptimizer(cfg.sgd),
        rngs=rngs,
    )


def train_task(state: TrainerState, task: Task, cfg: RunConfig) -> TrainerState:
    """Train the current task for cfg.epochs_per_task epochs, then absorb it.

    With zero epochs the task is skipped entirely (only the task index
    advances); otherwise the task's train samples are streamed into the
    replay buffer after its last epoch.
    """
    if cfg.epochs_per_task == 0:
        state.task_index += 1
        return state

    train = task.train
    warned_empty_buffer = False
    for epoch in range(cfg.epochs_per_task):
        order = state.rngs["shuffle"].permutation(len(train))
        batch_losses = []
        for start in range(0, len(train), cfg.batch_current):
            current = [train[i] for i in order[start : start + cfg.batch_current]]
            if cfg.batch_replay > 0 and len(state.buffer) > 0:
                replayed = replay.sample(state.buffer, cfg.batch_replay, state.rngs["replay"])
            else:
                replayed = []
                if cfg.batch_replay > 0 and not warned_empty_buffer:
                    logger.info(
                        "task %d: replay requested but buffer is empty; "
                        "training on current views only",
                        state.task_index,
                    )
                    warned_empty_buffer = True
            composed = compose_batch(current, replayed, cfg.augment, state.rngs["augment"])
            _, embeddings = enc.forward(state.net, composed.inputs)
            batch = ContrastiveBatch(
                embeddings=embeddings, labels=composed.labels, anchors=composed.anchors
            )
            out = asym_supcon_loss_backward(batch, cfg.loss)
            grads = enc.backward(state.net, composed.inputs, out.grad)
            state.optimizer.step(state.net, grads)
            batch_losses.append(out.value)
        state.loss_history.append(
            (state.task_index, epoch, float(np.mean(batch_losses)))
        )

    for s in train:
        replay.reservoir_insert(state.buffer, s, state.rngs["buffer"])
    state.task_index += 1
    return state


def probe_training_set(stream: TaskStream, state: TrainerState) -> list[Sample]:
    """Final-task train samples plus the current buffer contents."""
    return list(stream.tasks[-1].train) + list(state.buffer.items)


def run_single_seed(stream: TaskStream, cfg: RunConfig, seed: int) -> tuple[TrainerState, SeedResult]:
    """Train all tasks in order for one seed, then probe and score."""
    state = init_trainer(seed, stream.input_dim, cfg)
    for task in stream.tasks:
        train_task(state, task, cfg)
    probe = evaluate.fit_probe(
        state.net,
        probe_training_set(stream, state),
        epochs=cfg.probe_epochs,
        lr=cfg.probe_lr,
        n_classes=stream.n_classes,
        rng=state.rngs["probe"],
        on_embedding=cfg.probe_on_embedding,
    )
    result = SeedResult(
        seed=seed,
        class_il=evaluate.class_il_accuracy(state.net, probe, stream, cfg.probe_on_embedding),
        task_il=evaluate.task_il_accuracy(state.net, probe, stream, cfg.probe_on_embedding),
        per_task=evaluate.per_task_accuracy(state.net, probe, stream, cfg.probe_on_embedding),
        loss_log=list(state.loss_history),
    )
    return state, result


def run_experiment(stream: TaskStream, cfg: RunConfig) -> tuple[TrainerState, RunMetrics]:
    """Run every seed in cfg.seeds and aggregate mean +/- sample std.

    Returns the last seed's final trainer state alongside the metrics.
    """
    results = []
    state = None
    for seed in cfg.seeds:
        state, result = run_single_seed(stream, cfg, seed)
        logger.info(
            "seed %d: class-IL %.4f task-IL %.4f", seed, result.class_il, result.task_il
        )
        results.append(result)
    return state, RunMetrics.aggregate(results)
