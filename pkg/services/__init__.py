from .emd_solver import TransportPlan, emd, transport_plan, ground_distance
from .samplers import (
    Sampler,
    MaskSampler,
    NetworkSampler,
    UniformMaskSampler,
    IntensityMaskSampler,
    LocationSampler,
    lift_mask,
)
from .equivariance import SamplerProbe, extract_graph, ideal_graph, aemd, alpha_for
from .dataset import SHAPE_CLASSES, gen_dataset, load_split, render_shape
from .trainer import Trainer, TrainResult, EvalResult, cosine_lr, evaluate, train
from .mask_export import export_masks, render_overlay

__all__ = [
    'TransportPlan',
    'emd',
    'transport_plan',
    'ground_distance',
    'Sampler',
    'MaskSampler',
    'NetworkSampler',
    'UniformMaskSampler',
    'IntensityMaskSampler',
    'LocationSampler',
    'lift_mask',
    'SamplerProbe',
    'extract_graph',
    'ideal_graph',
    'aemd',
    'alpha_for',
    'SHAPE_CLASSES',
    'gen_dataset',
    'load_split',
    'render_shape',
    'Trainer',
    'TrainResult',
    'EvalResult',
    'cosine_lr',
    'evaluate',
    'train',
    'export_masks',
    'render_overlay',
]
