"""Encoder tests: init determinism, forward contract, exact backprop, SGD."""

import numpy as np
import pytest

from tvmf_cl import encoder as enc
from tvmf_cl.encoder import Affine, EncoderNet, SgdConfig, SgdOptimizer
from tvmf_cl.loss import ContrastiveBatch, LossConfig, asym_supcon_loss, asym_supcon_loss_backward
from tvmf_cl.similarity import SimilarityKind


def identity_net(dim=2):
    eye = np.eye(dim)
    return EncoderNet(
        trunk=[Affine(W=eye.copy(), b=np.zeros(dim))],
        head=[
            Affine(W=eye.copy(), b=np.zeros(dim)),
            Affine(W=eye.copy(), b=np.zeros(dim)),
        ],
    )


class TestInit:
    def test_same_seed_identical(self):
        a = enc.init(3, [8, 8, 4], [4, 4, 2])
        b = enc.init(3, [8, 8, 4], [4, 4, 2])
        assert enc.params_checksum(a) == enc.params_checksum(b)

    def test_different_seed_differs(self):
        a = enc.init(3, [8, 8, 4], [4, 4, 2])
        b = enc.init(4, [8, 8, 4], [4, 4, 2])
        assert enc.params_checksum(a) != enc.params_checksum(b)

    def test_param_count_by_shape_arithmetic(self):
        net = enc.init(0, [8, 8, 4], [4, 4, 2])
        expected = (8 * 8 + 8) + (8 * 4 + 4) + (4 * 4 + 4) + (4 * 2 + 2)
        assert net.param_count() == expected == 138

    def test_biases_zero_weights_bounded(self):
        net = enc.init(0, [8, 8, 4], [4, 4, 2])
        for group in (net.trunk, net.head):
            for layer in group:
                fan_in = layer.W.shape[0]
                assert np.all(layer.b == 0.0)
                assert np.max(np.abs(layer.W)) <= 1.0 / np.sqrt(fan_in)

    def test_invalid_dims_rejected(self):
        with pytest.raises(ValueError):
            enc.init(0, [8], [8, 4, 2])
        with pytest.raises(ValueError):
            enc.init(0, [8, 4], [4, 4])  # head must be 2 layers
        with pytest.raises(ValueError):
            enc.init(0, [8, 4], [3, 4, 2])  # head input != representation dim
        with pytest.raises(ValueError):
            enc.init(0, [8, 4], [4, 4, 1])  # projection dim too small


class TestForward:
    def test_zero_net_zero_input_raises(self):
        net = enc.init(0, [4, 4], [4, 4, 2])
        for layer in net.trunk + net.head:
            layer.W[:] = 0.0
            layer.b[:] = 0.0
        with pytest.raises(ValueError, match="zero-norm"):
            enc.forward(net, np.zeros(4))

    def test_identity_net_normalizes_relu_of_input(self):
        net = identity_net(2)
        x = np.array([0.6, -0.8])
        rep, emb = enc.forward(net, x)
        assert np.allclose(rep, x)
        expected = np.array([1.0, 0.0])  # ReLU keeps 0.6, kills -0.8, normalize
        assert np.allclose(emb, expected)

    def test_embedding_is_unit_norm(self, rng):
        net = enc.init(1, [6, 5, 4], [4, 4, 3])
        x = rng.normal(size=(20, 6))
        _, emb = enc.forward(net, x)
        assert np.allclose(np.linalg.norm(emb, axis=1), 1.0, atol=1e-6)

    def test_dim_mismatch(self):
        net = enc.init(0, [4, 4], [4, 4, 2])
        with pytest.raises(ValueError, match="input dim"):
            enc.forward(net, np.zeros(5))

    def test_single_vector_matches_batch_row(self, rng):
        net = enc.init(0, [6, 5, 4], [4, 4, 3])
        x = rng.normal(size=(3, 6))
        rep_b, emb_b = enc.forward(net, x)
        rep_1, emb_1 = enc.forward(net, x[1])
        # batched and single paths may differ in the last bit (BLAS
        # reduction order); they must agree to full double precision
        assert np.allclose(rep_1, rep_b[1], rtol=1e-14, atol=1e-15)
        assert np.allclose(emb_1, emb_b[1], rtol=1e-14, atol=1e-15)


class TestBackward:
    def test_hand_derived_single_layer(self):
        # trunk W, identity head in its linear region: emb = h / ||h||
        # with h = x W + b, so dL/dW = x^T [(I - u u^T) g / ||h||].
        net = identity_net(2)
        net.trunk[0].W = np.array([[2.0, 0.0], [0.0, 3.0]])
        net.trunk[0].b = np.array([0.1, 0.2])
        x = np.array([0.4, 0.3])
        g = np.array([1.0, -0.5])
        h = x @ net.trunk[0].W + net.trunk[0].b
        assert np.all(h > 0)  # head ReLU passes through
        n = np.linalg.norm(h)
        u = h / n
        d_raw = (g - np.dot(g, u) * u) / n
        grads = enc.backward(net, x, g)
        assert np.allclose(grads.trunk[0].W, np.outer(x, d_raw), atol=1e-14)
        assert np.allclose(grads.trunk[0].b, d_raw, atol=1e-14)
        assert np.allclose(grads.head[0].W, np.outer(h, d_raw), atol=1e-14)
        assert np.allclose(grads.head[1].W, np.outer(h, d_raw), atol=1e-14)

    def test_zero_upstream_gives_zero_grads(self, rng):
        net = enc.init(2, [5, 4], [4, 4, 2])
        x = rng.normal(size=(4, 5))
        grads = enc.backward(net, x, np.zeros((4, 2)))
        for layer in grads.trunk + grads.head:
            assert np.all(layer.W == 0.0)
            assert np.all(layer.b == 0.0)

    def test_batch_grads_sum_per_sample(self, rng):
        net = enc.init(2, [5, 4], [4, 4, 2])
        x = rng.normal(size=(3, 5))
        g = rng.normal(size=(3, 2))
        batch = enc.backward(net, x, g)
        acc = [np.zeros_like(p) for _, p in net.named_params()]
        for i in range(3):
            single = enc.backward(net, x[i], g[i])
            for j, (_, grad) in enumerate(_named(single)):
                acc[j] += grad
        for j, (_, grad) in enumerate(_named(batch)):
            assert np.allclose(grad, acc[j], atol=1e-12)

    @pytest.mark.parametrize(
        "kind",
        [SimilarityKind.cosine(), SimilarityKind.vmf(16.0), SimilarityKind.tvmf(16.0)],
        ids=lambda k: k.describe(),
    )
    def test_loss_composition_passes_finite_differences(self, kind, rng):
        net = enc.init(11, [4, 4], [4, 3, 2])
        assert net.param_count() <= 200
        x = rng.normal(size=(6, 4))
        labels = np.array([0, 0, 1, 1, 0, 0])
        anchors = np.arange(4)
        cfg = LossConfig(temperature=0.5, kind=kind)

        def loss_value():
            _, emb = enc.forward(net, x)
            batch = ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors)
            return asym_supcon_loss(batch, cfg)

        _, emb = enc.forward(net, x)
        batch = ContrastiveBatch(embeddings=emb, labels=labels, anchors=anchors)
        out = asym_supcon_loss_backward(batch, cfg)
        grads = dict(_named(enc.backward(net, x, out.grad)))

        h = 1e-5
        for name, param in net.named_params():
            an = grads[name]
            fd = np.zeros_like(param)
            it = np.nditer(param, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + h
                up = loss_value()
                param[idx] = orig - h
                down = loss_value()
                param[idx] = orig
                fd[idx] = (up - down) / (2 * h)
                it.iternext()
            err = np.max(np.abs(fd - an)) / max(1.0, np.max(np.abs(an)))
            assert err < 1e-6, f"{name}: rel err {err:.3e}"


def _named(grads):
    for group, layers in (("trunk", grads.trunk), ("head", grads.head)):
        for i, layer in enumerate(layers):
            yield f"{group}.{i}.W", layer.W
            yield f"{group}.{i}.b", layer.b


class TestSgd:
    def make_grads(self, net, value=1.0):
        return enc.ParamGrads(
            trunk=[Affine(np.full_like(a.W, value), np.full_like(a.b, value)) for a in net.trunk],
            head=[Affine(np.full_like(a.W, value), np.full_like(a.b, value)) for a in net.head],
        )

    def test_zero_lr_leaves_net_unchanged(self):
        net = enc.init(0, [4, 4], [4, 4, 2])
        before = enc.params_checksum(net)
        opt = SgdOptimizer(SgdConfig(learning_rate=0.0, momentum=0.9))
        opt.step(net, self.make_grads(net))
        assert enc.params_checksum(net) == before

    def test_plain_step_subtracts_gradient(self):
        net = enc.init(0, [4, 4], [4, 4, 2])
        w_before = net.trunk[0].W.copy()
        opt = SgdOptimizer(SgdConfig(learning_rate=1.0, momentum=0.0))
        opt.step(net, self.make_grads(net, 0.25))
        assert np.allclose(net.trunk[0].W, w_before - 0.25)

    def test_momentum_matches_hand_unrolled_recurrence(self):
        net = enc.init(0, [4, 4], [4, 4, 2])
        p0 = net.trunk[0].W.copy()
        lr, m = 0.1, 0.9
        opt = SgdOptimizer(SgdConfig(learning_rate=lr, momentum=m))
        g1, g2 = 0.5, -0.25
        opt.step(net, self.make_grads(net, g1))
        opt.step(net, self.make_grads(net, g2))
        v1 = m * 0.0 + g1
        v2 = m * v1 + g2
        expected = p0 - lr * v1 - lr * v2
        assert np.allclose(net.trunk[0].W, expected, atol=1e-15)

    def test_shape_mismatch_rejected(self):
        net = enc.init(0, [4, 4], [4, 4, 2])
        other = enc.init(0, [5, 4], [4, 4, 2])
        opt = SgdOptimizer(SgdConfig())
        with pytest.raises(ValueError):
            opt.step(net, self.make_grads(other))

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            SgdConfig(learning_rate=-1.0)
        with pytest.raises(ValueError):
            SgdConfig(momentum=1.0)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        net = enc.init(9, [6, 5, 4], [4, 4, 3])
        path = tmp_path / "net.ckpt"
        enc.save(net, path)
        assert path.read_text().startswith("TVMF-CKPT-1\n")
        loaded = enc.load(path)
        assert enc.params_checksum(loaded) == enc.params_checksum(net)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_text("NOT-A-CKPT\n")
        with pytest.raises(ValueError, match="TVMF-CKPT-1"):
            enc.load(path)

    def test_determinism_after_training_steps(self, rng):
        def run():
            net = enc.init(3, [4, 4], [4, 3, 2])
            opt = SgdOptimizer(SgdConfig(learning_rate=0.1, momentum=0.5))
            local = np.random.default_rng(0)
            for _ in range(5):
                x = local.normal(size=(4, 4))
                g = local.normal(size=(4, 2))
                grads = enc.backward(net, x, g)
                opt.step(net, grads)
            return enc.params_checksum(net)

        assert run() == run()
