"""Sampling-equivariant self-attention layer.

Masks are regressed from center-query minus unfolded-key relations,
normalized over the k*k footprint, used to aggregate the value map, and
embedded into each aggregated scalar by one affine map shared across
channels and positions.

The footprint-sized steps (relation, aggregation, embedding) are fused ops
that never materialize [N, c_v, k*k, H, W]; the mask regressor is replayed
in backward instead of keeping its intermediates on the tape.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from autograd import Tensor, enable_grad, is_grad_enabled, no_grad, ops
from autograd.tensor import backward as autograd_backward, record
from layers.module import Module, Sequential
from layers.primitives import BatchNorm, Linear, ReLU, batchnorm_forward, linear_forward
from models.configs import SESLayerConfig
from utils.errors import ShapeError


POSITION_CHANNELS = 2


@dataclass
class ForwardRecord:
    """Optional sink for per-layer masks and value maps, in layer call order"""
    masks: List[np.ndarray] = field(default_factory=list)
    values: List[np.ndarray] = field(default_factory=list)


class SESLayer(Module):
    def __init__(self, config: SESLayerConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        relation_channels = config.c_qk + (POSITION_CHANNELS if config.positional_encoding else 0)
        self.lin_v = Linear(config.c_in, config.c_v, rng)
        self.lin_q = Linear(config.c_in, config.c_qk, rng)
        self.lin_k = Linear(config.c_in, config.c_qk, rng)
        self.lin_p = Linear(POSITION_CHANNELS, POSITION_CHANNELS, rng) if config.positional_encoding else None
        self.gamma_mlp = Sequential(
            BatchNorm(relation_channels),
            ReLU(),
            Linear(relation_channels, config.c_qk, rng),
            BatchNorm(config.c_qk),
            ReLU(),
            Linear(config.c_qk, config.c_w, rng),
        )
        self.zeta = (Linear(1 + config.footprint, 1, rng, feature_axis=2)
                     if config.transformation_embedding else None)
        self.lin_out = Linear(config.c_v, config.c_out, rng)

    def forward(self, v_src: Tensor, qk_src: Tensor, k_src: Optional[Tensor] = None,
                record: Optional[ForwardRecord] = None) -> Tensor:
        return ses_forward(self, v_src, qk_src, k_src, record)


def _batched(x: Tensor, rank: int) -> Tuple[Tensor, Callable[[Tensor], Tensor]]:
    """Accept the per-image form (rank - 1 axes) by adding a batch axis of 1."""
    if x.ndim == rank:
        return x, lambda t: t
    if x.ndim == rank - 1:
        return ops.reshape(x, (1,) + x.shape), lambda t: ops.reshape(t, t.shape[1:])
    raise ShapeError(f"expected rank {rank} or {rank - 1}, got shape {x.shape}")


def _footprint(k: int) -> List[Tuple[int, int, int]]:
    """(j, dy, dx) for every footprint cell, j = dy*k + dx"""
    return [(dy * k + dx, dy, dx) for dy in range(k) for dx in range(k)]


def _pad_spatial(data: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(data, ((0, 0),) * (data.ndim - 2) + ((pad, pad), (pad, pad)))


def relation(query: Tensor, key: Tensor, k: int) -> Tensor:
    """[N,C,H,W] pair -> [N,C,k*k,H,W] of q_center - k_neighbor, keys zero padded."""
    if query.shape != key.shape or query.ndim != 4:
        raise ShapeError(f"relation expects two equal [N,C,H,W] maps, got {query.shape} and {key.shape}")
    n, c, h, w = query.shape
    pad = (k - 1) // 2
    padded = _pad_spatial(key.data, pad)
    out = np.empty((n, c, k * k, h, w))
    for j, dy, dx in _footprint(k):
        np.subtract(query.data, padded[:, :, dy:dy + h, dx:dx + w], out=out[:, :, j])

    def backward(g):
        grad_padded = np.zeros(padded.shape)
        for j, dy, dx in _footprint(k):
            grad_padded[:, :, dy:dy + h, dx:dx + w] -= g[:, :, j]
        return g.sum(axis=2), grad_padded[:, :, pad:pad + h, pad:pad + w]

    return record('relation', out, (query, key), backward)


def position_relation(layer: SESLayer, batch: int, height: int, width: int) -> Tensor:
    """SAN-style relative position encoding of a normalized pixel grid."""
    ys = np.linspace(-1.0, 1.0, height) if height > 1 else np.zeros(1)
    xs = np.linspace(-1.0, 1.0, width) if width > 1 else np.zeros(1)
    grid = np.stack(np.meshgrid(ys, xs, indexing='ij'))
    grid = np.broadcast_to(grid, (batch, POSITION_CHANNELS, height, width))
    encoded = linear_forward(layer.lin_p, Tensor(grid))
    return relation(encoded, encoded, layer.config.k)


def gamma_forward(layer: SESLayer, queries: Tensor, keys: Tensor, update_stats: bool = True) -> Tensor:
    """softmax over the footprint of gamma(relation(queries, keys)); [N, c_w, k*k, H, W]"""
    x = relation(queries, keys, layer.config.k)
    if layer.lin_p is not None:
        n, _, h, w = queries.shape
        x = ops.concat([x, position_relation(layer, n, h, w)], axis=1)
    for stage in layer.gamma_mlp:
        if isinstance(stage, BatchNorm):
            x = batchnorm_forward(stage, x, update_stats=update_stats)
        else:
            x = stage(x)
    return ops.softmax(x, axes=(2,))


def _gamma_parameters(layer: SESLayer) -> Tuple[Tensor, ...]:
    params = layer.gamma_mlp.parameters()
    if layer.lin_p is not None:
        params += layer.lin_p.parameters()
    return tuple(params)


def checkpointed_masks(layer: SESLayer, queries: Tensor, keys: Tensor) -> Tensor:
    """Masks whose footprint-sized intermediates are rebuilt during backward.

    The forward runs without a tape; backward replays gamma on fresh leaves
    with frozen running statistics, accumulates the gamma parameter gradients
    directly and returns the query/key gradients.
    """
    params = _gamma_parameters(layer)
    with no_grad():
        masks = gamma_forward(layer, queries, keys)

    def backward(g):
        q_leaf = Tensor(queries.data, requires_grad=True)
        k_leaf = Tensor(keys.data, requires_grad=True)
        with enable_grad():
            replay = gamma_forward(layer, q_leaf, k_leaf, update_stats=False)
            autograd_backward(ops.sum(ops.mul(replay, Tensor(g, _copy=False))))
        return (q_leaf.grad.data, k_leaf.grad.data) + (None,) * len(params)

    return record('gamma', masks.data, (queries, keys) + params, backward)


def regress_masks(layer: SESLayer, q_src: Tensor, k_src: Tensor) -> Tensor:
    """Sampling masks [N, c_w, k*k, H, W]; each footprint distribution sums to 1."""
    config = layer.config
    q_src, unbatch = _batched(q_src, 4)
    k_src, _ = _batched(k_src, 4)
    if q_src.shape != k_src.shape:
        raise ShapeError(f"query and key sources must align, got {q_src.shape} and {k_src.shape}")
    if q_src.shape[1] != config.c_in:
        raise ShapeError(f"layer expects {config.c_in} input channels, got {q_src.shape[1]}")
    queries = linear_forward(layer.lin_q, q_src)
    keys = linear_forward(layer.lin_k, k_src)
    if is_grad_enabled() and (queries.requires_grad or keys.requires_grad):
        return unbatch(checkpointed_masks(layer, queries, keys))
    return unbatch(gamma_forward(layer, queries, keys))


def aggregate(v: Tensor, w: Tensor, k: int, r3: int) -> Tensor:
    """V'[c] = sum_j w[c // r3, j] * unfold(v)[c, j] at every position."""
    v, unbatch = _batched(v, 4)
    w, _ = _batched(w, 5)
    n, c_v, h, width = v.shape
    c_w = w.shape[1]
    if c_v != c_w * r3:
        raise ShapeError(f"value channels {c_v} != mask channels {c_w} * r3 {r3}")
    if w.shape[2] != k * k or w.shape[3:] != v.shape[2:] or w.shape[0] != n:
        raise ShapeError(f"mask shape {w.shape} does not match values {v.shape} with k={k}")
    pad = (k - 1) // 2
    # value channel g*r3 + r reads mask channel g
    grouped = _pad_spatial(v.data, pad).reshape(n, c_w, r3, h + 2 * pad, width + 2 * pad)
    out = np.zeros((n, c_w, r3, h, width))
    for j, dy, dx in _footprint(k):
        out += w.data[:, :, j, None] * grouped[..., dy:dy + h, dx:dx + width]

    def backward(g):
        g = g.reshape(n, c_w, r3, h, width)
        grad_grouped = np.zeros(grouped.shape)
        grad_w = np.empty(w.shape)
        for j, dy, dx in _footprint(k):
            window = grouped[..., dy:dy + h, dx:dx + width]
            grad_w[:, :, j] = np.einsum('ngrhw,ngrhw->nghw', g, window)
            grad_grouped[..., dy:dy + h, dx:dx + width] += g * w.data[:, :, j, None]
        grad_v = grad_grouped.reshape(n, c_v, h + 2 * pad, width + 2 * pad)
        return grad_v[:, :, pad:pad + h, pad:pad + width], grad_w

    return unbatch(record('aggregate', out.reshape(n, c_v, h, width), (v, w), backward))


def embed_transformation(v_prime: Tensor, w: Tensor, zeta: Optional[Linear]) -> Tensor:
    """Y[c, p] = zeta([V'[c, p]; w[c // r3, :, p]]); ``zeta=None`` is pass-through.

    zeta is affine, so Y = a*V' + (b . w + bias) with the mask term computed
    once per mask channel and shared by its r3 value channels.
    """
    if zeta is None:
        return v_prime
    v_prime, unbatch = _batched(v_prime, 4)
    w, _ = _batched(w, 5)
    n, c_v, h, width = v_prime.shape
    c_w, footprint = w.shape[1], w.shape[2]
    if c_v % c_w:
        raise ShapeError(f"mask channels {c_w} do not divide value channels {c_v}")
    if zeta.in_features != 1 + footprint or zeta.out_features != 1:
        raise ShapeError(f"zeta must map {1 + footprint} -> 1, has "
                         f"{zeta.in_features} -> {zeta.out_features}")
    r3 = c_v // c_w
    a = zeta.weight.data[0, 0]
    b = zeta.weight.data[0, 1:]
    bias = zeta.bias.data[0] if zeta.bias is not None else 0.0
    mask_term = np.tensordot(w.data, b, axes=([2], [0])) + bias
    out = a * v_prime.data.reshape(n, c_w, r3, h, width) + mask_term[:, :, None]

    def backward(g):
        grouped = g.reshape(n, c_w, r3, h, width).sum(axis=2)
        grad_weight = np.empty((1, 1 + footprint))
        grad_weight[0, 0] = np.vdot(g, v_prime.data)
        grad_weight[0, 1:] = np.tensordot(grouped, w.data, axes=([0, 1, 2, 3], [0, 1, 3, 4]))
        grads = (a * g, grouped[:, :, None] * b[:, None, None], grad_weight)
        return grads + ((np.array([g.sum()]),) if zeta.bias is not None else ())

    inputs = (v_prime, w, zeta.weight) + ((zeta.bias,) if zeta.bias is not None else ())
    return unbatch(record('embed', out.reshape(n, c_v, h, width), inputs, backward))


def ses_forward(layer: SESLayer, v_src: Tensor, qk_src: Tensor, k_src: Optional[Tensor] = None,
                record: Optional[ForwardRecord] = None) -> Tensor:
    """lin_out(zeta(aggregate(lin_v(v_src), w), w)), w regressed from the query/key sources.

    ``k_src`` defaults to ``qk_src``; routing variants pass it separately.
    """
    config = layer.config
    v_src, unbatch = _batched(v_src, 4)
    qk_src, _ = _batched(qk_src, 4)
    k_src = qk_src if k_src is None else _batched(k_src, 4)[0]
    masks = regress_masks(layer, qk_src, k_src)
    values = linear_forward(layer.lin_v, v_src)
    sampled = aggregate(values, masks, config.k, config.r3)
    embedded = embed_transformation(sampled, masks, layer.zeta)
    out = linear_forward(layer.lin_out, embedded)
    if record is not None:
        record.masks.append(masks.numpy())
        record.values.append(values.numpy())
    return unbatch(out)


def _linear_count(in_features: int, out_features: int) -> int:
    return in_features * out_features + out_features


def ses_parameter_count(config: SESLayerConfig) -> int:
    """Trainable parameters of one SES layer, counted from its config."""
    relation_channels = config.c_qk + (POSITION_CHANNELS if config.positional_encoding else 0)
    count = _linear_count(config.c_in, config.c_v)
    count += 2 * _linear_count(config.c_in, config.c_qk)
    count += 2 * relation_channels + _linear_count(relation_channels, config.c_qk)
    count += 2 * config.c_qk + _linear_count(config.c_qk, config.c_w)
    count += _linear_count(config.c_v, config.c_out)
    if config.transformation_embedding:
        count += _linear_count(1 + config.footprint, 1)
    if config.positional_encoding:
        count += _linear_count(POSITION_CHANNELS, POSITION_CHANNELS)
    return count


def conv_parameter_count(c_in: int, c_out: int, k: int, bias: bool = True) -> int:
    return k * k * c_in * c_out + (c_out if bias else 0)
