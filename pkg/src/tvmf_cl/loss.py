"""Asymmetric supervised contrastive loss under a configurable similarity.

The loss sums over an anchor set S (current-task views only) and, per
anchor i, averages -log softmax terms over its positive set
P(i) = {p != i : label(p) = label(i)} against the contrast set
A(i) = all other batch indices:

    L = sum_{i in S} (-1 / |P(i)|) sum_{p in P(i)}
        log[ exp(phi(c_ip) / tau) / sum_{a in A(i)} exp(phi(c_ia) / tau) ]

where c_ij is the cosine of embeddings i and j and phi is the configured
similarity (cosine, vMF or t-vMF). Softmax denominators are computed with
max-subtraction. Anchors whose positive set is empty contribute nothing;
a batch where every anchor has an empty positive set is an error.

The backward pass returns exact gradients with respect to the embeddings
for the function as computed: the cosine is the normalized dot product
(so gradients stay exact under finite-difference probing of raw
embedding coordinates) and pairs whose raw cosine was clamped to +/-1
receive zero gradient through the clamp.

Everything here is pure computation on immutable batch data; per-anchor
terms are reduced in a fixed left-to-right order so results are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import similarity
from .similarity import SimilarityKind


@dataclass
class ContrastiveBatch:
    """Two-view embedding batch with labels and an anchor index set.

    Views of the same source sample sit at adjacent indices (2k, 2k+1) and
    carry the same label; batch composition guarantees that pairing, it is
    not re-checked here so synthetic test batches can break it on purpose.

    Attributes:
        embeddings: (2N, D) array of unit-norm rows.
        labels: (2N,) integer class ids.
        anchors: indices of current-task views (the set S), nonempty.
    """

    embeddings: np.ndarray
    labels: np.ndarray
    anchors: np.ndarray

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        self.anchors = np.asarray(self.anchors, dtype=np.int64).ravel()
        n = self.embeddings.shape[0]
        if self.embeddings.ndim != 2:
            raise ValueError("embeddings must be a 2-D array")
        if self.labels.shape[0] != n:
            raise ValueError(
                f"{n} embeddings but {self.labels.shape[0]} labels"
            )
        if n == 0 or n % 2 != 0:
            raise ValueError(f"batch size must be even and positive, got {n}")
        if self.anchors.size == 0:
            raise ValueError("anchor set must be nonempty")
        if np.any(self.anchors < 0) or np.any(self.anchors >= n):
            raise ValueError("anchor index out of range")
        if len(set(self.anchors.tolist())) != self.anchors.size:
            raise ValueError("anchor indices must be unique")
        norms = np.linalg.norm(self.embeddings, axis=1)
        if np.any(np.abs(norms - 1.0) > similarity.UNIT_NORM_TOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ValueError(
                f"embeddings must be unit-norm (worst deviation {worst:.3e})"
            )

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]


@dataclass
class IndexSets:
    """Per-anchor contrast and positive index sets.

    ``contrast[i]`` is every batch index except i; ``positives[i]`` are the
    members of ``contrast[i]`` sharing anchor i's label. Anchors whose
    positive set came out empty are listed in ``empty_anchors`` and skipped
    by the loss.
    """

    contrast: dict[int, np.ndarray]
    positives: dict[int, np.ndarray]
    empty_anchors: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class LossConfig:
    """Temperature, similarity choice and optional anchor-mean rescaling.

    ``mean_over_anchors`` divides the summed loss by |S|; the plain sum is
    the default. Default temperature is 0.5.
    """

    temperature: float = 0.5
    kind: SimilarityKind = field(default_factory=SimilarityKind.cosine)
    mean_over_anchors: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass
class LossOutput:
    """Loss value and per-embedding gradient of the same shape."""

    value: float
    grad: np.ndarray


def build_index_sets(batch: ContrastiveBatch) -> IndexSets:
    """Compute A(i) and P(i) for every anchor i in the batch."""
    n = batch.size
    all_idx = np.arange(n)
    contrast: dict[int, np.ndarray] = {}
    positives: dict[int, np.ndarray] = {}
    empty: list[int] = []
    for i in batch.anchors.tolist():
        a_i = all_idx[all_idx != i]
        p_i = a_i[batch.labels[a_i] == batch.labels[i]]
        contrast[i] = a_i
        positives[i] = p_i
        if p_i.size == 0:
            empty.append(i)
    return IndexSets(contrast=contrast, positives=positives, empty_anchors=empty)


def _pairwise_cosine(embeddings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized-dot-product cosine matrix and the mask of clamped entries."""
    norms = np.linalg.norm(embeddings, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding")
    unit = embeddings / norms[:, None]
    raw = unit @ unit.T
    clamped = np.abs(raw) > 1.0
    return np.clip(raw, -1.0, 1.0), clamped


def _anchor_terms(batch: ContrastiveBatch, cfg: LossConfig):
    """Shared forward machinery: logits, index sets, per-anchor softmax stats."""
    sets = build_index_sets(batch)
    skipped = set(sets.empty_anchors)
    active = [i for i in batch.anchors.tolist() if i not in skipped]
    if not active:
        raise ValueError("no positive pairs: every anchor has an empty positive set")
    cos, clamped = _pairwise_cosine(batch.embeddings)
    phi = cfg.kind.similarity(cos)
    logits = phi / cfg.temperature
    return sets, active, cos, clamped, phi, logits


def asym_supcon_loss(batch: ContrastiveBatch, cfg: LossConfig) -> float:
    """Loss value for the batch. See the module docstring for the form."""
    sets, active, _, _, _, logits = _anchor_terms(batch, cfg)
    total = 0.0
    for i in active:
        a_i = sets.contrast[i]
        p_i = sets.positives[i]
        row = logits[i, a_i]
        m = np.max(row)
        lse = m + np.log(np.sum(np.exp(row - m)))
        total += float(np.sum(lse - logits[i, p_i]) / p_i.size)
    if cfg.mean_over_anchors:
        total /= batch.anchors.size
    return total


def asym_supcon_loss_backward(batch: ContrastiveBatch, cfg: LossConfig) -> LossOutput:
    """Loss value plus exact gradients with respect to every embedding.

    Chain rule: d L / d logit -> d phi / d cosine (zero for clamped pairs)
    -> d cosine / d embedding through the row normalization.
    """
    sets, active, cos, clamped, _, logits = _anchor_terms(batch, cfg)
    n = batch.size
    total = 0.0
    # g[i, j] = d L / d logits[i, j]; rows only for active anchors.
    g = np.zeros((n, n))
    for i in active:
        a_i = sets.contrast[i]
        p_i = sets.positives[i]
        row = logits[i, a_i]
        m = np.max(row)
        shifted = np.exp(row - m)
        denom = np.sum(shifted)
        lse = m + np.log(denom)
        total += float(np.sum(lse - logits[i, p_i]) / p_i.size)
        g[i, a_i] = shifted / denom
        g[i, p_i] -= 1.0 / p_i.size
    scale = 1.0 / batch.anchors.size if cfg.mean_over_anchors else 1.0
    if cfg.mean_over_anchors:
        total *= scale

    # d L / d cosine: through phi, killed where the raw cosine was clamped.
    dphi = cfg.kind.similarity_dcos(cos)
    q = (scale / cfg.temperature) * g * dphi
    q[clamped] = 0.0

    # Cosine of rows i, j is unit_i . unit_j; fold both sides of each pair.
    norms = np.linalg.norm(batch.embeddings, axis=1)
    unit = batch.embeddings / norms[:, None]
    r = q + q.T
    grad = (r @ unit - np.sum(r * cos, axis=1)[:, None] * unit) / norms[:, None]
    return LossOutput(value=total, grad=grad)
