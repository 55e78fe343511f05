"""Error hierarchy shared by every package.

Each error carries a short ``category`` that the CLI prints as the
machine-parsable part of its one-line failure message.
"""


class SESError(Exception):
    category = 'internal'
    exit_code = 1


class ConfigError(SESError):
    category = 'config'
    exit_code = 2


class ShapeError(SESError):
    category = 'shape'
    exit_code = 3


class NonFiniteError(SESError):
    category = 'numeric'
    exit_code = 3


class AutogradError(SESError):
    category = 'autograd'
    exit_code = 3


class GeometryError(SESError):
    category = 'geometry'
    exit_code = 4


class EMDError(SESError):
    category = 'emd'
    exit_code = 5


class HarnessError(SESError):
    category = 'harness'
    exit_code = 5


class CheckpointError(SESError):
    category = 'checkpoint'
    exit_code = 6


class DatasetError(SESError):
    category = 'io'
    exit_code = 6


class TrainingDivergedError(SESError):
    category = 'divergence'
    exit_code = 7
