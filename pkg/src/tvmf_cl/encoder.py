"""Small MLP encoder with projection head, exact backprop and momentum SGD.

The network is a trunk of affine layers with ReLU between them (the last
trunk output, the "representation", is not activated) followed by a
2-layer projection head (affine, ReLU, affine) whose output is L2
normalized into the embedding. Desk-scale stand-in for a large conv
encoder: small enough that gradient checks can sweep every parameter.

Gradients are exact for the function as computed: the normalization
Jacobian is (I - u u^T) / ||h|| and the ReLU subgradient at exactly 0
is 0. Zero-norm head outputs raise instead of being epsilon-shifted,
so gradient checks are never silently corrupted.

Forward/backward are pure given the net; the trainer owns the net
exclusively while updating it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint

_ZERO_NORM_FLOOR = 1e-30


@dataclass
class Affine:
    """One affine transform y = x @ W + b, with W shaped (fan_in, fan_out)."""

    W: np.ndarray
    b: np.ndarray


@dataclass
class EncoderNet:
    """Trunk + projection head parameters. Build with :func:`init`."""

    trunk: list[Affine]
    head: list[Affine]

    def param_count(self) -> int:
        return sum(a.W.size + a.b.size for a in self.trunk + self.head)

    def named_params(self):
        """Yield (name, array) pairs in a fixed order."""
        for group, layers in (("trunk", self.trunk), ("head", self.head)):
            for i, layer in enumerate(layers):
                yield f"{group}.{i}.W", layer.W
                yield f"{group}.{i}.b", layer.b

    @property
    def input_dim(self) -> int:
        return self.trunk[0].W.shape[0]

    @property
    def representation_dim(self) -> int:
        return self.trunk[-1].W.shape[1]

    @property
    def projection_dim(self) -> int:
        return self.head[-1].W.shape[1]


@dataclass
class ParamGrads:
    """Gradients with the same layer structure as :class:`EncoderNet`."""

    trunk: list[Affine]
    head: list[Affine]


@dataclass
class SgdConfig:
    """Classical momentum SGD hyperparameters."""

    learning_rate: float = 0.05
    momentum: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


def init(seed: int, layer_dims, head_dims) -> EncoderNet:
    """Deterministically initialize a network from a seed.

    Args:
        seed: RNG seed; identical seeds give identical parameters.
        layer_dims: Trunk dimension chain, e.g. [32, 32, 16]
            (input 32 -> hidden 32 -> representation 16).
        head_dims: Projection head chain of exactly 3 dims,
            e.g. [16, 16, 8]; must start at the representation dim and
            end at the projection dim (>= 2).

    Weights are uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    """
    layer_dims = [int(d) for d in layer_dims]
    head_dims = [int(d) for d in head_dims]
    if len(layer_dims) < 2:
        raise ValueError("trunk needs at least input and output dims")
    if len(head_dims) != 3:
        raise ValueError("projection head is 2 layers: give [in, hidden, out]")
    if head_dims[0] != layer_dims[-1]:
        raise ValueError(
            f"head input dim {head_dims[0]} != representation dim {layer_dims[-1]}"
        )
    if head_dims[-1] < 2:
        raise ValueError("projection dim must be >= 2")
    if any(d < 1 for d in layer_dims + head_dims):
        raise ValueError("all layer dims must be positive")

    rng = np.random.default_rng(seed)

    def make(dims):
        layers = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            scale = 1.0 / np.sqrt(fan_in)
            layers.append(
                Affine(
                    W=rng.uniform(-scale, scale, size=(fan_in, fan_out)),
                    b=np.zeros(fan_out),
                )
            )
        return layers

    return EncoderNet(trunk=make(layer_dims), head=make(head_dims))


def _promote(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim != 2:
        raise ValueError("input must be a vector or a (batch, dim) array")
    return arr, False


@dataclass
class _ForwardCache:
    x: np.ndarray
    trunk_pre: list[np.ndarray] = field(default_factory=list)
    trunk_post: list[np.ndarray] = field(default_factory=list)
    head_pre: list[np.ndarray] = field(default_factory=list)
    head_post: list[np.ndarray] = field(default_factory=list)
    raw: np.ndarray | None = None
    norms: np.ndarray | None = None


def _forward_cached(net: EncoderNet, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, _ForwardCache]:
    if x.shape[1] != net.input_dim:
        raise ValueError(f"input dim {x.shape[1]} != network input dim {net.input_dim}")
    cache = _ForwardCache(x=x)
    h = x
    for k, layer in enumerate(net.trunk):
        pre = h @ layer.W + layer.b
        cache.trunk_pre.append(pre)
        h = np.maximum(pre, 0.0) if k < len(net.trunk) - 1 else pre
        cache.trunk_post.append(h)
    rep = h
    for k, layer in enumerate(net.head):
        pre = h @ layer.W + layer.b
        cache.head_pre.append(pre)
        h = np.maximum(pre, 0.0) if k < len(net.head) - 1 else pre
        cache.head_post.append(h)
    raw = h
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms < _ZERO_NORM_FLOOR):
        raise ValueError("zero-norm embedding: head output has no direction")
    cache.raw = raw
    cache.norms = norms
    emb = raw / norms[:, None]
    return rep, emb, cache


def forward(net: EncoderNet, x) -> tuple[np.ndarray, np.ndarray]:
    """Run the network on one input vector or a batch.

    Returns:
        (representation, embedding): pre-head features and the unit-norm
        projection. Shapes follow the input (vector in, vectors out).
    """
    arr, single = _promote(x)
    rep, emb, _ = _forward_cached(net, arr)
    if single:
        return rep[0], emb[0]
    return rep, emb


def backward(net: EncoderNet, x, grad_embedding) -> ParamGrads:
    """Exact reverse-mode parameter gradients.

    Args:
        net: The network.
        x: Input vector or (batch, dim) array.
        grad_embedding: Upstream gradient on the embedding(s), same shape
            as the forward embedding output. Batch gradients accumulate.
    """
    arr, single = _promote(x)
    g = np.asarray(grad_embedding, dtype=np.float64)
    if single:
        g = g[None, :]
    _, _, cache = _forward_cached(net, arr)
    if g.shape != cache.raw.shape:
        raise ValueError(f"upstream grad shape {g.shape} != embedding shape {cache.raw.shape}")

    norms = cache.norms
    unit = cache.raw / norms[:, None]
    # d(h/||h||)/dh = (I - u u^T) / ||h||, applied per row.
    d = (g - np.sum(g * unit, axis=1)[:, None] * unit) / norms[:, None]

    def back_through(layers, pres, inputs, d):
        grads = [None] * len(layers)
        for k in range(len(layers) - 1, -1, -1):
            inp = inputs[k]
            grads[k] = Affine(W=inp.T @ d, b=np.sum(d, axis=0))
            d = d @ layers[k].W.T
            if k > 0:
                d = d * (pres[k - 1] > 0)
        return grads, d

    head_inputs = [cache.trunk_post[-1]] + cache.head_post[:-1]
    head_grads, d = back_through(net.head, cache.head_pre, head_inputs, d)
    trunk_inputs = [cache.x] + cache.trunk_post[:-1]
    trunk_grads, _ = back_through(net.trunk, cache.trunk_pre, trunk_inputs, d)
    return ParamGrads(trunk=trunk_grads, head=head_grads)


class SgdOptimizer:
    """Classical momentum SGD: v <- m v + g; p <- p - lr v.

    Velocities are created lazily on the first step and persist across
    steps; updates mutate the net in place (single writer).
    """

    def __init__(self, cfg: SgdConfig):
        self.cfg = cfg
        self._velocity: ParamGrads | None = None

    def step(self, net: EncoderNet, grads: ParamGrads) -> EncoderNet:
        if self._velocity is None:
            self._velocity = ParamGrads(
                trunk=[Affine(np.zeros_like(a.W), np.zeros_like(a.b)) for a in net.trunk],
                head=[Affine(np.zeros_like(a.W), np.zeros_like(a.b)) for a in net.head],
            )
        lr, m = self.cfg.learning_rate, self.cfg.momentum
        for params, gs, vs in (
            (net.trunk, grads.trunk, self._velocity.trunk),
            (net.head, grads.head, self._velocity.head),
        ):
            if len(params) != len(gs):
                raise ValueError("gradient structure does not match the network")
            for p, gl, v in zip(params, gs, vs):
                if p.W.shape != gl.W.shape or p.b.shape != gl.b.shape:
                    raise ValueError("gradient shapes do not match the network")
                v.W = m * v.W + gl.W
                v.b = m * v.b + gl.b
                p.W -= lr * v.W
                p.b -= lr * v.b
        return net


def sgd_step(net: EncoderNet, grads: ParamGrads, opt: SgdOptimizer) -> EncoderNet:
    """Apply one optimizer step; convenience wrapper around ``opt.step``."""
    return opt.step(net, grads)


def save(net: EncoderNet, path) -> None:
    """Write all parameters to a TVMF-CKPT-1 checkpoint file."""
    meta = {
        "meta.trunk_layers": np.array(len(net.trunk), dtype=np.int64),
        "meta.head_layers": np.array(len(net.head), dtype=np.int64),
    }
    tensors = dict(net.named_params())
    checkpoint.write_tensors(path, {**meta, **tensors})


def load(path) -> EncoderNet:
    """Rebuild a network from a checkpoint written by :func:`save`."""
    tensors = checkpoint.read_tensors(path)
    n_trunk = int(tensors["meta.trunk_layers"])
    n_head = int(tensors["meta.head_layers"])

    def grab(group, count):
        return [
            Affine(W=tensors[f"{group}.{i}.W"], b=tensors[f"{group}.{i}.b"])
            for i in range(count)
        ]

    return EncoderNet(trunk=grab("trunk", n_trunk), head=grab("head", n_head))


def params_checksum(net: EncoderNet) -> str:
    """Stable hex digest of all parameter bytes; detects any mutation."""
    import hashlib

    h = hashlib.sha256()
    for name, arr in net.named_params():
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()
