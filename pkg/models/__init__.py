from .configs import SESLayerConfig, RNMConfig, NetworkConfig, TrainConfig, ROUTING_CHOICES
from .sampling import SamplingGraph
from .report import AEMDRecord, AEMDReport

__all__ = [
    'SESLayerConfig',
    'RNMConfig',
    'NetworkConfig',
    'TrainConfig',
    'ROUTING_CHOICES',
    'SamplingGraph',
    'AEMDRecord',
    'AEMDReport',
]
