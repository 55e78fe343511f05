"""Residual SES blocks and the toy classification network."""

from typing import Dict, List, Optional

import numpy as np

from autograd import Tensor, ops
from layers.module import Module
from layers.primitives import BatchNorm, Linear
from layers.rnm import RandomizedNorm
from layers.ses_layer import ForwardRecord, SESLayer
from models.configs import NetworkConfig, RNMConfig, SESLayerConfig


NOISE_STREAM_OFFSET = 1000


class SESBlock(Module):
    """x + SES(ReLU(norm(x))) where norm is RNM, or BN when routing is 'none'."""

    def __init__(self, layer_config: SESLayerConfig, rnm: RNMConfig,
                 rng: np.random.Generator, noise_rng: np.random.Generator):
        super().__init__()
        self.rnm_config = rnm
        if rnm.enabled:
            self.norm = RandomizedNorm(layer_config.c_in, rnm, noise_rng)
        else:
            self.norm = BatchNorm(layer_config.c_in)
        self.ses = SESLayer(layer_config, rng)
        self.shortcut = (Linear(layer_config.c_in, layer_config.c_out, rng)
                         if layer_config.c_in != layer_config.c_out else None)

    def forward(self, x: Tensor, record: Optional[ForwardRecord] = None) -> Tensor:
        if isinstance(self.norm, RandomizedNorm):
            clean, perturbed = self.norm(x)
        else:
            clean = perturbed = self.norm(x)
        clean_act = ops.relu(clean)
        perturbed_act = clean_act if perturbed is clean else ops.relu(perturbed)
        routing = self.rnm_config.routing
        v_src = perturbed_act if 'v' in routing else clean_act
        q_src = perturbed_act if 'q' in routing else clean_act
        k_src = perturbed_act if 'k' in routing else clean_act
        out = self.ses(v_src, q_src, k_src, record)
        skip = x if self.shortcut is None else self.shortcut(x)
        return ops.add(skip, out)


class SESNet(Module):
    """stem 1x1 linear -> stages of SES blocks, each followed by a 2x2 max pool
    -> global average pool -> linear classifier."""

    def __init__(self, config: NetworkConfig, seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.stem = Linear(config.in_channels, config.widths[0], rng)
        self.blocks: List[SESBlock] = []
        for index, (c_in, c_out) in enumerate(config.block_channels()):
            noise_rng = np.random.default_rng([seed, NOISE_STREAM_OFFSET + index])
            self.blocks.append(SESBlock(config.layer_config(c_in, c_out), config.rnm, rng, noise_rng))
        self.head = Linear(config.widths[-1], config.num_classes, rng)

    def block_stride(self, index: int) -> int:
        return self.config.stage_strides()[index // self.config.blocks_per_stage]

    def ses_layers_by_stride(self) -> Dict[int, List[int]]:
        """stride -> indices of the SES layers operating at that stride"""
        layers: Dict[int, List[int]] = {}
        for index in range(len(self.blocks)):
            layers.setdefault(self.block_stride(index), []).append(index)
        return layers

    def forward(self, x: Tensor, record: Optional[ForwardRecord] = None) -> Tensor:
        x = self.stem(x)
        per_stage = self.config.blocks_per_stage
        for index, block in enumerate(self.blocks):
            x = block(x, record)
            if (index + 1) % per_stage == 0:
                x = ops.maxpool2(x)
        pooled = ops.mean(x, axes=(2, 3))
        return self.head(pooled)
