"""Linear, BatchNorm, ReLU, max-pool and cross-entropy building blocks."""

from typing import Optional

import numpy as np

from autograd import Tensor, ops
from layers.module import Module
from utils.errors import ShapeError


DEFAULT_MOMENTUM = 0.1
DEFAULT_EPS = 1e-5


class Linear(Module):
    """Affine map over one feature axis; weight [out, in], bias [out]."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True, feature_axis: int = 1):
        super().__init__()
        if in_features <= 0 or out_features <= 0:
            raise ShapeError(f"linear extents must be positive, got {in_features}->{out_features}")
        self.in_features = in_features
        self.out_features = out_features
        self.feature_axis = feature_axis
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Tensor(rng.uniform(-bound, bound, size=(out_features, in_features)),
                             requires_grad=True)
        self.bias = Tensor(rng.uniform(-bound, bound, size=(out_features,)),
                           requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return linear_forward(self, x, self.feature_axis)


def linear_forward(layer: Linear, x: Tensor, axis: int = 1) -> Tensor:
    """Apply ``layer`` independently at every index of the axes other than ``axis``."""
    if x.ndim == 1:
        axis = 0
    axis %= x.ndim
    if x.shape[axis] != layer.in_features:
        raise ShapeError(f"linear expects {layer.in_features} features on axis {axis}, "
                         f"got shape {x.shape}")
    return ops.linear(x, layer.weight, layer.bias, axis)


class BatchNorm(Module):
    """Per-channel normalization of [N, C, ...] over every axis except 1."""

    def __init__(self, channels: int, momentum: float = DEFAULT_MOMENTUM, eps: float = DEFAULT_EPS):
        super().__init__()
        if channels <= 0 or eps <= 0 or not 0 < momentum <= 1:
            raise ShapeError(f"invalid batch norm setup: channels={channels}, "
                             f"momentum={momentum}, eps={eps}")
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.register_buffer('running_mean', np.zeros(channels))
        self.register_buffer('running_var', np.ones(channels))

    @property
    def running_mean(self) -> np.ndarray:
        return self._buffers['running_mean']

    @property
    def running_var(self) -> np.ndarray:
        return self._buffers['running_var']

    def forward(self, x: Tensor) -> Tensor:
        return batchnorm_forward(self, x)


def batchnorm_forward(layer: BatchNorm, x: Tensor, mode: Optional[str] = None,
                      update_stats: bool = True) -> Tensor:
    """Train mode normalizes with batch statistics and moves the running
    statistics toward them; eval mode uses the running statistics."""
    mode = mode or ('train' if layer.training else 'eval')
    if mode == 'eval':
        return ops.batch_norm_eval(x, layer.gamma, layer.beta,
                                   layer.running_mean, layer.running_var, layer.eps)
    if mode != 'train':
        raise ShapeError(f"batch norm mode must be 'train' or 'eval', got '{mode}'")
    out, batch_mean, batch_var = ops.batch_norm_train(x, layer.gamma, layer.beta, layer.eps)
    if update_stats:
        layer.running_mean[...] = layer.running_mean + layer.momentum * (batch_mean - layer.running_mean)
        layer.running_var[...] = layer.running_var + layer.momentum * (batch_var - layer.running_var)
    return out


class ReLU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return ops.relu(x)


class MaxPool2(Module):
    def forward(self, x: Tensor) -> Tensor:
        return ops.maxpool2(x)


def relu(x: Tensor) -> Tensor:
    return ops.relu(x)


def maxpool2(x: Tensor) -> Tensor:
    return ops.maxpool2(x)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    return ops.cross_entropy(logits, labels)
