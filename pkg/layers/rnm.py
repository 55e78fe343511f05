"""Randomized normalization: a BatchNorm that also emits a noise-perturbed,
re-standardized branch during training."""

from typing import Optional, Tuple

import numpy as np

from autograd import Tensor, ops
from layers.primitives import DEFAULT_EPS, DEFAULT_MOMENTUM, BatchNorm, batchnorm_forward
from models.configs import RNMConfig
from utils.errors import ConfigError


class RandomizedNorm(BatchNorm):
    """Same parameters and buffers as BatchNorm; owns its noise generator."""

    def __init__(self, channels: int, config: RNMConfig, rng: np.random.Generator,
                 momentum: float = DEFAULT_MOMENTUM, eps: float = DEFAULT_EPS):
        super().__init__(channels, momentum, eps)
        self.config = config
        self.rng = rng

    def forward(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        return rnm_forward(self, x, self.config, rng=self.rng)


def rnm_forward(layer: BatchNorm, x: Tensor, cfg: RNMConfig, mode: Optional[str] = None,
                rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, Tensor]:
    """(x_clean, x_perturbed).

    Train: x_clean = BN(x) with running-stat update; x_perturbed = BN(x + eta),
    eta ~ Normal(0, variance r) per element, normalized with its own batch
    statistics and leaving the running statistics untouched.
    Eval: both outputs are the same BN eval tensor and no noise is drawn.
    """
    if cfg.r < 0:
        raise ConfigError(f"RNM noise variance must be >= 0, got {cfg.r}")
    mode = mode or ('train' if layer.training else 'eval')
    if mode == 'eval':
        out = batchnorm_forward(layer, x, 'eval')
        return out, out
    clean = batchnorm_forward(layer, x, 'train')
    if cfg.r == 0:
        return clean, clean
    if rng is None:
        raise ConfigError("RNM needs a random generator in train mode")
    noise = rng.normal(0.0, np.sqrt(cfg.r), size=x.shape)
    perturbed = batchnorm_forward(layer, ops.add(x, Tensor(noise)), 'train', update_stats=False)
    return clean, perturbed
