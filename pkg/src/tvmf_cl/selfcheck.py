"""Built-in verification battery behind the ``check`` CLI subcommand.

Each check is deterministic (fixed seeds) and self-contained: similarity
invariants are asserted over random draws, the contrastive loss is
compared against a naive double-loop reference, and analytic gradients
are compared against central finite differences. The battery reports one
boolean per check so a fault injected anywhere in the similarity or loss
stack is named, not just detected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import encoder as enc
from . import loss as loss_mod
from . import similarity
from .loss import ContrastiveBatch, LossConfig
from .similarity import SimilarityKind

_SEED = 20240916


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _draws(rng, n):
    c = rng.uniform(-1.0, 1.0, size=n)
    k = rng.uniform(0.0, 64.0, size=n)
    return c, k


def check_similarity_bounds() -> CheckResult:
    rng = np.random.default_rng(_SEED)
    c, k = _draws(rng, 4000)
    ok = True
    worst = 0.0
    for ci, ki in zip(c, k):
        for v in (
            similarity.tvmf_similarity(ci, ki),
            similarity.vmf_similarity(ci, ki + 1e-9),
        ):
            worst = max(worst, abs(v) - 1.0)
            if not -1.0 <= v <= 1.0:
                ok = False
    return CheckResult("similarity_bounds", ok, f"max |value|-1 = {worst:.3e}")


def check_similarity_endpoints() -> CheckResult:
    rng = np.random.default_rng(_SEED + 1)
    kappas = rng.uniform(0.0, 64.0, size=200)
    ok = all(
        similarity.tvmf_similarity(1.0, k) == 1.0
        and similarity.tvmf_similarity(-1.0, k) == -1.0
        for k in kappas
    )
    ok = ok and all(
        abs(similarity.vmf_similarity(1.0, k) - 1.0) == 0.0
        and abs(similarity.vmf_similarity(-1.0, k) + 1.0) == 0.0
        for k in kappas[kappas > 0]
    )
    return CheckResult("similarity_endpoints", ok, "phi(+/-1) = +/-1 exactly")


def check_similarity_monotone() -> CheckResult:
    rng = np.random.default_rng(_SEED + 2)
    ok = True
    for _ in range(2000):
        c1, c2 = sorted(rng.uniform(-1.0, 1.0, size=2))
        if c1 == c2:
            continue
        k = float(rng.uniform(0.0, 64.0))
        if similarity.tvmf_similarity(c2, k) <= similarity.tvmf_similarity(c1, k):
            ok = False
        # vMF saturates to -1.0 in double precision once exp(k(c-1))
        # drops below the FP granularity at -1; require strictness only
        # where the values are resolvable, monotone non-decrease always.
        kv = k + 1e-6
        v1 = similarity.vmf_similarity(c1, kv)
        v2 = similarity.vmf_similarity(c2, kv)
        if v2 < v1:
            ok = False
        if math.exp(kv * (c1 - 1.0)) >= 1e-12 and v2 <= v1:
            ok = False
    return CheckResult("similarity_monotone_cos", ok, "phi strictly increases in cos")


def check_similarity_compactness() -> CheckResult:
    rng = np.random.default_rng(_SEED + 3)
    ok = True
    for _ in range(2000):
        c = float(rng.uniform(-0.999, 0.999))
        k1, k2 = sorted(rng.uniform(0.0, 64.0, size=2))
        if k1 == k2:
            continue
        v1 = similarity.tvmf_similarity(c, k1)
        v2 = similarity.tvmf_similarity(c, k2)
        if not v2 < v1:
            ok = False
        if similarity.tvmf_similarity(c, k2) > c:
            ok = False
    return CheckResult(
        "similarity_kappa_compactness", ok, "phi_t decreases in kappa, phi_t <= cos"
    )


def check_similarity_reduction() -> CheckResult:
    rng = np.random.default_rng(_SEED + 4)
    c = rng.uniform(-1.0, 1.0, size=2000)
    exact = all(similarity.tvmf_similarity(ci, 0.0) == ci for ci in c)
    near = max(abs(similarity.tvmf_similarity(ci, 1e-8) - ci) for ci in c)
    ok = exact and near <= 1e-7
    return CheckResult(
        "similarity_cosine_reduction", ok, f"kappa=0 bit-exact; |drift at 1e-8| = {near:.2e}"
    )


def check_derivation_consistency() -> CheckResult:
    rng = np.random.default_rng(_SEED + 5)
    c, k = _draws(rng, 2000)
    worst = 0.0
    for ci, ki in zip(c, k):
        d = math.sqrt(max(0.0, 2.0 - 2.0 * ci))
        f_d = similarity.profile_t(d, ki)
        f_0 = similarity.profile_t(0.0, ki)
        f_2 = similarity.profile_t(2.0, ki)
        rescaled = 2.0 * (f_d - f_2) / (f_0 - f_2) - 1.0
        worst = max(worst, abs(rescaled - similarity.tvmf_similarity(ci, ki)))
    return CheckResult(
        "derivation_consistency", worst <= 1e-12, f"max |rescaled - closed form| = {worst:.3e}"
    )


def check_tvmf_gradient() -> CheckResult:
    rng = np.random.default_rng(_SEED + 6)
    h = 1e-6
    worst = 0.0
    for _ in range(1000):
        c = float(rng.uniform(-1.0 + 2 * h, 1.0 - 2 * h))
        k = float(rng.uniform(0.0, 64.0))
        fd = (similarity.tvmf_similarity(c + h, k) - similarity.tvmf_similarity(c - h, k)) / (2 * h)
        an = similarity.tvmf_similarity_dcos(c, k)
        worst = max(worst, abs(fd - an) / max(1.0, abs(an)))
    return CheckResult("tvmf_gradient", worst <= 1e-6, f"max rel err = {worst:.3e}")


def _naive_loss(embeddings, labels, anchors, kind: SimilarityKind, tau: float) -> float:
    """Independent double-loop evaluation of the anchored contrastive loss."""
    n = len(labels)
    unit = [np.asarray(e) / np.linalg.norm(e) for e in embeddings]
    total = 0.0
    any_pos = False
    for i in anchors:
        contrast = [a for a in range(n) if a != i]
        positives = [p for p in contrast if labels[p] == labels[i]]
        if not positives:
            continue
        any_pos = True
        denom = 0.0
        for a in contrast:
            c = min(1.0, max(-1.0, float(np.dot(unit[i], unit[a]))))
            denom += math.exp(float(kind.similarity(c)) / tau)
        inner = 0.0
        for p in positives:
            c = min(1.0, max(-1.0, float(np.dot(unit[i], unit[p]))))
            inner += math.log(math.exp(float(kind.similarity(c)) / tau) / denom)
        total += -inner / len(positives)
    if not any_pos:
        raise ValueError("no positive pairs")
    return total


def _random_batch(rng, n_pairs, dim):
    n = 2 * n_pairs
    emb = rng.normal(size=(n, dim))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    labels = np.repeat(rng.integers(0, max(2, n_pairs // 2 + 1), size=n_pairs), 2)
    n_anchor_pairs = int(rng.integers(1, n_pairs + 1))
    anchors = np.arange(2 * n_anchor_pairs)
    return ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors)


def check_loss_oracle() -> CheckResult:
    rng = np.random.default_rng(_SEED + 7)
    kinds = [
        SimilarityKind.cosine(),
        SimilarityKind.vmf(16.0),
        SimilarityKind.tvmf(16.0),
    ]
    worst = 0.0
    for _ in range(20):
        batch = _random_batch(rng, n_pairs=int(rng.integers(2, 8)), dim=int(rng.integers(2, 8)))
        for kind in kinds:
            cfg = LossConfig(temperature=0.5, kind=kind)
            got = loss_mod.asym_supcon_loss(batch, cfg)
            want = _naive_loss(batch.embeddings, batch.labels, batch.anchors, kind, 0.5)
            worst = max(worst, abs(got - want))
    return CheckResult("loss_oracle", worst <= 1e-10, f"max |loss - reference| = {worst:.3e}")


def _loss_fd_rel_err(batch: ContrastiveBatch, cfg: LossConfig, h=1e-5) -> float:
    out = loss_mod.asym_supcon_loss_backward(batch, cfg)
    an = out.grad
    fd = np.zeros_like(an)
    emb = batch.embeddings
    for j in range(emb.shape[0]):
        for d in range(emb.shape[1]):
            orig = emb[j, d]
            emb[j, d] = orig + h
            up = loss_mod.asym_supcon_loss(batch, cfg)
            emb[j, d] = orig - h
            down = loss_mod.asym_supcon_loss(batch, cfg)
            emb[j, d] = orig
            fd[j, d] = (up - down) / (2 * h)
    return float(np.max(np.abs(fd - an)) / max(1.0, np.max(np.abs(an))))


def check_loss_gradient() -> CheckResult:
    rng = np.random.default_rng(_SEED + 8)
    worst = 0.0
    for kind in (SimilarityKind.cosine(), SimilarityKind.vmf(16.0), SimilarityKind.tvmf(16.0)):
        batch = _random_batch(rng, n_pairs=4, dim=5)
        worst = max(worst, _loss_fd_rel_err(batch, LossConfig(temperature=0.5, kind=kind)))
    return CheckResult("loss_gradient", worst <= 1e-5, f"max rel err = {worst:.3e}")


def _encoder_loss_value(net, x, labels, anchors, cfg) -> float:
    _, emb = enc.forward(net, x)
    batch = ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors)
    return loss_mod.asym_supcon_loss(batch, cfg)


def check_encoder_gradient() -> CheckResult:
    rng = np.random.default_rng(_SEED + 9)
    net = enc.init(7, [4, 4], [4, 3, 2])
    x = rng.normal(size=(6, 4))
    labels = np.array([0, 0, 1, 1, 0, 0])
    anchors = np.arange(4)
    worst = 0.0
    h = 1e-5
    for kind in (SimilarityKind.cosine(), SimilarityKind.vmf(16.0), SimilarityKind.tvmf(16.0)):
        cfg = LossConfig(temperature=0.5, kind=kind)
        _, emb = enc.forward(net, x)
        batch = ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors)
        out = loss_mod.asym_supcon_loss_backward(batch, cfg)
        grads = enc.backward(net, x, out.grad)
        an_layers = {name: g for name, g in _named_grads(grads)}
        for name, param in net.named_params():
            an = an_layers[name]
            fd = np.zeros_like(param)
            it = np.nditer(param, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + h
                up = _encoder_loss_value(net, x, labels, anchors, cfg)
                param[idx] = orig - h
                down = _encoder_loss_value(net, x, labels, anchors, cfg)
                param[idx] = orig
                fd[idx] = (up - down) / (2 * h)
                it.iternext()
            scale = max(1.0, float(np.max(np.abs(an))))
            worst = max(worst, float(np.max(np.abs(fd - an))) / scale)
    return CheckResult("encoder_gradient", worst <= 1e-6, f"max rel err = {worst:.3e}")


def _named_grads(grads):
    for group, layers in (("trunk", grads.trunk), ("head", grads.head)):
        for i, layer in enumerate(layers):
            yield f"{group}.{i}.W", layer.W
            yield f"{group}.{i}.b", layer.b


ALL_CHECKS = [
    check_similarity_bounds,
    check_similarity_endpoints,
    check_similarity_monotone,
    check_similarity_compactness,
    check_similarity_reduction,
    check_derivation_consistency,
    check_tvmf_gradient,
    check_loss_oracle,
    check_loss_gradient,
    check_encoder_gradient,
]


def run_all() -> dict:
    """Run every check; returns a JSON-ready report with per-check booleans."""
    checks = {}
    all_passed = True
    for fn in ALL_CHECKS:
        try:
            result = fn()
        except Exception as e:  # a crash is a failure, not an abort
            result = CheckResult(fn.__name__.removeprefix("check_"), False, f"raised {e!r}")
        checks[result.name] = {"passed": bool(result.passed), "detail": result.detail}
        all_passed = all_passed and bool(result.passed)
    return {"all_passed": all_passed, "checks": checks}
