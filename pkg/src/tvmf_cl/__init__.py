"""Desk-scale continual contrastive representation learning with t-vMF similarity."""

from .similarity import (
    SimilarityKind,
    chord_distance,
    cosine,
    profile_exp,
    profile_t,
    similarity_curve,
    tvmf_similarity,
    tvmf_similarity_dcos,
    vmf_similarity,
    vmf_similarity_dcos,
)
from .loss import (
    ContrastiveBatch,
    IndexSets,
    LossConfig,
    LossOutput,
    asym_supcon_loss,
    asym_supcon_loss_backward,
    build_index_sets,
)
from .encoder import EncoderNet, ParamGrads, SgdConfig, SgdOptimizer
from .buffer import ReplayBuffer, reservoir_insert
from .data import AugmentConfig, Sample, Task, TaskStream, synthetic_stream, two_views
from .continual import ComposedBatch, RunConfig, TrainerState, compose_batch, run_experiment, train_task
from .evaluate import LinearProbe, RunMetrics, SeedResult, class_il_accuracy, fit_probe, task_il_accuracy

__version__ = "0.1.0"

__all__ = [
    "SimilarityKind",
    "chord_distance",
    "cosine",
    "profile_exp",
    "profile_t",
    "similarity_curve",
    "tvmf_similarity",
    "tvmf_similarity_dcos",
    "vmf_similarity",
    "vmf_similarity_dcos",
    "ContrastiveBatch",
    "IndexSets",
    "LossConfig",
    "LossOutput",
    "asym_supcon_loss",
    "asym_supcon_loss_backward",
    "build_index_sets",
    "EncoderNet",
    "ParamGrads",
    "SgdConfig",
    "SgdOptimizer",
    "ReplayBuffer",
    "reservoir_insert",
    "AugmentConfig",
    "Sample",
    "Task",
    "TaskStream",
    "synthetic_stream",
    "two_views",
    "ComposedBatch",
    "RunConfig",
    "TrainerState",
    "compose_batch",
    "run_experiment",
    "train_task",
    "LinearProbe",
    "RunMetrics",
    "SeedResult",
    "class_il_accuracy",
    "fit_probe",
    "task_il_accuracy",
]
