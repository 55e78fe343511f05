from .logger import setup_logger
from .pnm import read_pgm, write_pgm, read_ppm, write_ppm, to_unit_range, to_uint8
from .errors import (
    SESError,
    ConfigError,
    ShapeError,
    NonFiniteError,
    AutogradError,
    GeometryError,
    EMDError,
    HarnessError,
    CheckpointError,
    DatasetError,
    TrainingDivergedError,
)

__all__ = [
    'setup_logger',
    'read_pgm',
    'write_pgm',
    'read_ppm',
    'write_ppm',
    'to_unit_range',
    'to_uint8',
    'SESError',
    'ConfigError',
    'ShapeError',
    'NonFiniteError',
    'AutogradError',
    'GeometryError',
    'EMDError',
    'HarnessError',
    'CheckpointError',
    'DatasetError',
    'TrainingDivergedError',
]
