"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest -s tests/test_acceptance.py -v` to see the per-criterion
lines. Tolerances are fixed here, not calibrated elsewhere.
"""

import json
import time

import numpy as np
from scipy import stats

from tvmf_cl import continual, data, encoder as enc, evaluate
from tvmf_cl import buffer as replay
from tvmf_cl.buffer import ReplayBuffer
from tvmf_cl.continual import RunConfig, run_experiment
from tvmf_cl.data import AugmentConfig, Sample
from tvmf_cl.encoder import SgdConfig
from tvmf_cl.loss import ContrastiveBatch, LossConfig, asym_supcon_loss, asym_supcon_loss_backward
from tvmf_cl.similarity import SimilarityKind, profile_t, tvmf_similarity

from conftest import random_unit_rows
from oracles import naive_asym_supcon_loss

TAU_DEFAULT = 0.5
KAPPA_DEFAULT = 16.0
KAPPA_SWEEP = [4.0, 16.0, 32.0]
BUFFER_SMALL = 200


def report(n, text, ok=True):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}")
    assert ok


class TestCriterion1SimilarityInvariants:
    def test_invariant_suite_under_one_second(self):
        rng = np.random.default_rng(101)
        n = 10_000
        c = rng.uniform(-1.0, 1.0, size=n)
        k = rng.uniform(0.0, 64.0, size=n)

        start = time.perf_counter()

        values = np.array([tvmf_similarity(ci, ki) for ci, ki in zip(c, k)])
        assert np.all(values >= -1.0) and np.all(values <= 1.0)

        for ki in k[:2000]:
            assert tvmf_similarity(1.0, ki) == 1.0
            assert tvmf_similarity(-1.0, ki) == -1.0

        # phi_t <= cos; interior draws (c < 1, kappa > 0 a.s.) are strict
        assert np.all(values[k > 0] < c[k > 0])
        assert tvmf_similarity(1.0, 13.0) == 1.0  # equality at c = 1
        assert tvmf_similarity(0.375, 0.0) == 0.375  # equality at kappa = 0

        for i in range(0, n, 2):
            c1, c2 = sorted((c[i], c[i - 1]))
            if c1 == c2:
                continue
            assert tvmf_similarity(c2, k[i]) > tvmf_similarity(c1, k[i])

        interior = rng.uniform(-0.999, 0.999, size=5000)
        for ci in interior:
            k1, k2 = sorted(rng.uniform(0.0, 64.0, size=2))
            if k1 == k2:
                continue
            assert tvmf_similarity(ci, k2) < tvmf_similarity(ci, k1)

        assert np.array_equal(tvmf_similarity(c, 0.0), c)

        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"invariant suite took {elapsed:.2f}s"
        report(1, f"t-vMF invariants over 10^4 draws in {elapsed:.2f}s")


class TestCriterion2DerivationConsistency:
    def test_profile_rescaling_matches_closed_form(self):
        rng = np.random.default_rng(102)
        worst = 0.0
        for _ in range(10_000):
            c = float(rng.uniform(-1.0, 1.0))
            k = float(rng.uniform(0.0, 64.0))
            d = np.sqrt(max(0.0, 2.0 - 2.0 * c))
            f_d, f_0, f_2 = profile_t(d, k), profile_t(0.0, k), profile_t(2.0, k)
            rescaled = 2.0 * (f_d - f_2) / (f_0 - f_2) - 1.0
            worst = max(worst, abs(rescaled - tvmf_similarity(c, k)))
        assert worst <= 1e-12
        report(2, f"profile rescaling vs closed form, max |diff| = {worst:.2e}")


ORACLE_KINDS = [
    SimilarityKind.cosine(),
    SimilarityKind.vmf(KAPPA_DEFAULT),
    *[SimilarityKind.tvmf(k) for k in KAPPA_SWEEP],
]


class TestCriterion3LossOracle:
    def test_hundred_random_batches_match_double_loop(self):
        rng = np.random.default_rng(103)
        worst = 0.0
        for _ in range(100):
            n_pairs = int(rng.integers(2, 9))  # up to 16 embeddings
            dim = int(rng.integers(2, 9))  # D <= 8
            emb = random_unit_rows(rng, 2 * n_pairs, dim)
            labels = np.repeat(rng.integers(0, max(2, n_pairs // 2 + 1), size=n_pairs), 2)
            anchors = np.arange(2 * int(rng.integers(1, n_pairs + 1)))
            batch = ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors)
            for kind in ORACLE_KINDS:
                got = asym_supcon_loss(batch, LossConfig(temperature=TAU_DEFAULT, kind=kind))
                want = naive_asym_supcon_loss(
                    emb, labels, anchors, kind.kind, kind.kappa, TAU_DEFAULT
                )
                worst = max(worst, abs(got - want))
        assert worst < 1e-10
        report(3, f"loss vs brute-force reference on 100 batches x 5 kinds, max |diff| = {worst:.2e}")


class TestCriterion4GradientChecks:
    def test_loss_encoder_composition_every_parameter(self):
        # seeds chosen so no ReLU pre-activation sits within the finite-
        # difference window of its kink (FD is meaningless across a kink)
        start = time.perf_counter()
        rng = np.random.default_rng(200)
        net = enc.init(2, [4, 4], [4, 3, 2])
        assert net.param_count() <= 200
        x = rng.normal(size=(6, 4))
        labels = np.array([0, 0, 1, 1, 0, 0])
        anchors = np.arange(4)
        h = 1e-5
        worst_overall = 0.0
        for kind in ORACLE_KINDS:
            cfg = LossConfig(temperature=TAU_DEFAULT, kind=kind)

            def value():
                _, emb = enc.forward(net, x)
                return asym_supcon_loss(
                    ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors), cfg
                )

            _, emb = enc.forward(net, x)
            out = asym_supcon_loss_backward(
                ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors), cfg
            )
            grads = enc.backward(net, x, out.grad)
            named = {}
            for group, layers in (("trunk", grads.trunk), ("head", grads.head)):
                for i, layer in enumerate(layers):
                    named[f"{group}.{i}.W"] = layer.W
                    named[f"{group}.{i}.b"] = layer.b
            for name, param in net.named_params():
                an = named[name]
                fd = np.zeros_like(param)
                it = np.nditer(param, flags=["multi_index"])
                while not it.finished:
                    idx = it.multi_index
                    orig = param[idx]
                    param[idx] = orig + h
                    up = value()
                    param[idx] = orig - h
                    down = value()
                    param[idx] = orig
                    fd[idx] = (up - down) / (2 * h)
                    it.iternext()
                err = float(np.max(np.abs(fd - an)) / max(1.0, np.max(np.abs(an))))
                assert err <= 1e-6, f"{kind.describe()} {name}: rel err {err:.3e}"
                worst_overall = max(worst_overall, err)
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0
        report(
            4,
            f"finite differences over all {net.param_count()} params x 5 kinds, "
            f"max rel err = {worst_overall:.2e} in {elapsed:.1f}s",
        )


def desk_run_config(kind, seeds, epochs=6):
    return RunConfig(
        sgd=SgdConfig(learning_rate=0.05, momentum=0.0),
        loss=LossConfig(temperature=TAU_DEFAULT, kind=kind),
        augment=AugmentConfig(noise_sigma=0.05, scale_jitter=0.1),
        hidden_dims=[32],
        representation_dim=16,
        projection_dim=16,
        epochs_per_task=epochs,
        batch_current=32,
        batch_replay=32,
        buffer_capacity=BUFFER_SMALL,
        probe_epochs=300,
        probe_lr=0.5,
        seeds=list(seeds),
    )


class TestCriterion5ReductionEquivalence:
    def test_zero_kappa_run_equals_cosine_run(self):
        stream = data.synthetic_stream(seed=7, n_classes=4, dim=16, per_class=30, spread=0.3)
        cfg_t = desk_run_config(SimilarityKind.tvmf(0.0), seeds=[0, 3], epochs=3)
        cfg_c = desk_run_config(SimilarityKind.cosine(), seeds=[0, 3], epochs=3)
        _, m_t = run_experiment(stream, cfg_t)
        _, m_c = run_experiment(stream, cfg_c)
        worst = 0.0
        for rt, rc in zip(m_t.per_seed, m_c.per_seed):
            assert len(rt.loss_log) == len(rc.loss_log) > 0
            for (t1, e1, v1), (t2, e2, v2) in zip(rt.loss_log, rc.loss_log):
                assert (t1, e1) == (t2, e2)
                worst = max(worst, abs(v1 - v2))
        assert worst <= 1e-10
        report(5, f"kappa=0 t-vMF vs cosine loss logs, max |diff| = {worst:.2e}")


class TestCriterion6ReservoirStatistics:
    def test_inclusion_uniformity_chi_square(self):
        n_stream, capacity, trials = 1000, 50, 1000
        samples = [Sample(input=np.array([float(i)]), label=0, task_id=0) for i in range(n_stream)]
        counts = np.zeros(n_stream)
        for trial in range(trials):
            rng = np.random.default_rng(10_000 + trial)
            buf = ReplayBuffer(capacity=capacity)
            for s in samples:
                replay.reservoir_insert(buf, s, rng)
            assert len(buf) == capacity
            for s in buf.items:
                counts[int(s.input[0])] += 1
        expected = trials * capacity / n_stream
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        p = float(stats.chi2.sf(chi2, df=n_stream - 1))
        assert p > 0.01
        report(6, f"inclusion uniformity N=1000 M=50 over {trials} seeds, chi2 p = {p:.3f}")


class TestCriterion7EndToEndDeskExperiment:
    def test_desk_experiment(self):
        start = time.perf_counter()
        stream = data.synthetic_stream(
            seed=0, n_classes=10, dim=32, per_class=40, spread=0.3
        )
        assert len(stream.tasks) == 5
        cfg = desk_run_config(
            SimilarityKind.tvmf(KAPPA_DEFAULT), seeds=[1, 2, 3], epochs=10
        )
        _, metrics = run_experiment(stream, cfg)
        elapsed = time.perf_counter() - start
        assert elapsed < 300.0, f"run took {elapsed:.0f}s"

        assert metrics.class_il_mean > 0.25  # chance is 0.10
        for result in metrics.per_seed:
            assert result.task_il >= result.class_il

        # bitwise-identical metrics on rerun
        _, again = run_experiment(stream, cfg)
        blob1 = json.dumps(metrics.to_json_dict(), sort_keys=True)
        blob2 = json.dumps(again.to_json_dict(), sort_keys=True)
        assert blob1.encode() == blob2.encode()
        report(
            7,
            f"5 tasks x 2 classes, buffer {BUFFER_SMALL}, kappa {KAPPA_DEFAULT:g}, "
            f"3 seeds in {elapsed:.1f}s: class-IL {metrics.class_il_mean:.3f} "
            f"(> 0.25), task-IL {metrics.task_il_mean:.3f}, rerun byte-identical",
        )


class TestCriterion8ProbeProtocol:
    def test_probe_data_audit_and_frozen_encoder(self, monkeypatch):
        stream = data.synthetic_stream(seed=9, n_classes=4, dim=16, per_class=30, spread=0.3)
        cfg = desk_run_config(SimilarityKind.tvmf(KAPPA_DEFAULT), seeds=[0], epochs=3)
        cfg.buffer_capacity = 40

        audit = {}
        original = evaluate.fit_probe

        def audited_fit_probe(net, samples, *args, **kwargs):
            audit["samples"] = list(samples)
            audit["checksum_before"] = enc.params_checksum(net)
            probe = original(net, samples, *args, **kwargs)
            audit["checksum_after"] = enc.params_checksum(net)
            return probe

        monkeypatch.setattr(continual.evaluate, "fit_probe", audited_fit_probe)

        state, _ = run_experiment(stream, cfg)

        assert "samples" in audit, "probe was never fitted"
        allowed = {id(s) for s in stream.tasks[-1].train} | {id(s) for s in state.buffer.items}
        used = [id(s) for s in audit["samples"]]
        assert used and all(u in allowed for u in used)
        # every class must still be covered (final task + buffer replay)
        labels = {s.label for s in audit["samples"]}
        assert labels == set(range(stream.n_classes))
        assert audit["checksum_before"] == audit["checksum_after"]
        report(
            8,
            f"probe saw {len(used)} samples, all from final task or buffer; "
            "encoder checksum unchanged",
        )
