from .module import Module, Sequential
from .primitives import (
    Linear,
    BatchNorm,
    ReLU,
    MaxPool2,
    linear_forward,
    batchnorm_forward,
    relu,
    maxpool2,
    cross_entropy,
)
from .ses_layer import (
    SESLayer,
    ForwardRecord,
    regress_masks,
    aggregate,
    embed_transformation,
    ses_forward,
    ses_parameter_count,
    conv_parameter_count,
)
from .rnm import RandomizedNorm, rnm_forward
from .network import SESBlock, SESNet
from .checkpoint import save_checkpoint, load_checkpoint, read_manifest

__all__ = [
    'Module',
    'Sequential',
    'Linear',
    'BatchNorm',
    'ReLU',
    'MaxPool2',
    'linear_forward',
    'batchnorm_forward',
    'relu',
    'maxpool2',
    'cross_entropy',
    'SESLayer',
    'ForwardRecord',
    'regress_masks',
    'aggregate',
    'embed_transformation',
    'ses_forward',
    'ses_parameter_count',
    'conv_parameter_count',
    'RandomizedNorm',
    'rnm_forward',
    'SESBlock',
    'SESNet',
    'save_checkpoint',
    'load_checkpoint',
    'read_manifest',
]
