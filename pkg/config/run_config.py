"""Command options: one declarative schema drives both argparse and JSON config files.

Effective values merge defaults < config file < flags, and each key remembers
where its value came from.
"""

import argparse
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from geometry.affine import TRANSFORM_KINDS
from models.configs import ROUTING_CHOICES
from utils.errors import ConfigError
from utils.logger import setup_logger


logger = setup_logger('run_config')

SAMPLERS = ('network', 'uniform', 'intensity', 'location')


@dataclass(frozen=True)
class OptionSpec:
    name: str
    type: str  # int | float | str | ints | json
    default: Any = None
    required: bool = False
    choices: Optional[Tuple[Any, ...]] = None
    help: str = ''

    @property
    def flag(self) -> str:
        return '--' + self.name.replace('_', '-')


def _seed() -> OptionSpec:
    return OptionSpec('seed', 'int', required=True, help='seed for every random draw of the command')


COMMAND_OPTIONS: Dict[str, Tuple[OptionSpec, ...]] = {
    'gen-data': (
        OptionSpec('out', 'str', required=True, help='dataset directory'),
        OptionSpec('n_per_class', 'int', 500, help='images per shape class'),
        OptionSpec('side', 'int', 64, help='image side in pixels (>= 32)'),
        OptionSpec('val_fraction', 'float', 0.2, help='share of images in the val split'),
        _seed(),
    ),
    'train': (
        OptionSpec('data', 'str', required=True, help='dataset directory'),
        OptionSpec('out', 'str', required=True, help='run directory (checkpoint + metrics)'),
        _seed(),
        OptionSpec('epochs', 'int', 20),
        OptionSpec('batch_size', 'int', 32),
        OptionSpec('lr', 'float', 0.05, help='base learning rate of the cosine schedule'),
        OptionSpec('momentum', 'float', 0.9),
        OptionSpec('weight_decay', 'float', 1e-4),
        OptionSpec('widths', 'ints', (32, 64), help='stage widths, e.g. 32,64'),
        OptionSpec('blocks_per_stage', 'int', 2),
        OptionSpec('k', 'int', 7, help='footprint side'),
        OptionSpec('r1', 'int', 1),
        OptionSpec('r2', 'int', 4),
        OptionSpec('r3', 'int', 4),
        OptionSpec('rnm_routing', 'str', 'qk', choices=ROUTING_CHOICES),
        OptionSpec('rnm_r', 'float', 0.005, help='RNM noise variance'),
        OptionSpec('ablation', 'str', 'ses', choices=('ses', 'san')),
    ),
    'evaluate': (
        OptionSpec('model', 'str', required=True, help='checkpoint directory'),
        OptionSpec('data', 'str', required=True, help='dataset directory'),
        OptionSpec('split', 'str', 'val', choices=('train', 'val')),
    ),
    'eval-aemd': (
        OptionSpec('model', 'str', help='checkpoint directory (network sampler)'),
        OptionSpec('data', 'str', required=True, help='dataset directory'),
        OptionSpec('split', 'str', 'val', choices=('train', 'val')),
        OptionSpec('transform', 'str', required=True, choices=TRANSFORM_KINDS),
        OptionSpec('params', 'json', help='fixed transform params, e.g. {"angle": 90}'),
        OptionSpec('n', 'int', 200, help='number of probed images'),
        OptionSpec('sampler', 'str', 'network', choices=SAMPLERS),
        OptionSpec('k', 'int', 3, help='footprint of the static samplers'),
        _seed(),
        OptionSpec('out', 'str', required=True, help='report JSON path'),
    ),
    'export-masks': (
        OptionSpec('model', 'str', required=True, help='checkpoint directory'),
        OptionSpec('image', 'str', required=True, help='PGM image'),
        OptionSpec('layer', 'int', required=True, help='SES layer index'),
        OptionSpec('row', 'int', required=True, help='center feature row'),
        OptionSpec('col', 'int', required=True, help='center feature column'),
        OptionSpec('out', 'str', required=True, help='output directory'),
    ),
    'gradcheck': (
        _seed(),
        OptionSpec('repeats', 'int', 10, help='number of consecutive seeds checked'),
        OptionSpec('channels', 'int', 16),
        OptionSpec('k', 'int', 7),
        OptionSpec('tolerance', 'float', 1e-4),
    ),
    'emd-selftest': (
        _seed(),
        OptionSpec('instances', 'int', 200, help='random 1-D instances'),
        OptionSpec('tolerance', 'float', 1e-9),
    ),
}


@dataclass
class RunConfig:
    command: str
    values: Dict[str, Any]
    # key -> default | file | flag
    provenance: Dict[str, str] = field(default_factory=dict, compare=False)

    def __getattr__(self, name: str) -> Any:
        values = self.__dict__.get('values', {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'command': self.command}
        for key, value in self.values.items():
            data[key] = list(value) if isinstance(value, tuple) else value
        return data

    def to_json(self, path: Union[str, Path, None] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def _type_error(key: str, expected: str, value: Any) -> ConfigError:
    return ConfigError(f"option '{key}' expects {expected}, got {value!r}")


def coerce(spec: OptionSpec, value: Any, from_flag: bool) -> Any:
    """Validate one value against its option; flag values arrive as strings"""
    if value is None:
        return None
    kind = spec.type
    if kind == 'int':
        if from_flag:
            try:
                value = int(value)
            except ValueError:
                raise _type_error(spec.name, 'an integer', value) from None
        if isinstance(value, bool) or not isinstance(value, int):
            raise _type_error(spec.name, 'an integer', value)
    elif kind == 'float':
        if from_flag:
            try:
                value = float(value)
            except ValueError:
                raise _type_error(spec.name, 'a number', value) from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _type_error(spec.name, 'a number', value)
        value = float(value)
    elif kind == 'str':
        if not isinstance(value, str):
            raise _type_error(spec.name, 'a string', value)
    elif kind == 'ints':
        if from_flag:
            try:
                value = [int(part) for part in str(value).split(',') if part.strip()]
            except ValueError:
                raise _type_error(spec.name, 'comma-separated integers', value) from None
        if (not isinstance(value, (list, tuple)) or not value
                or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
            raise _type_error(spec.name, 'a non-empty list of integers', value)
        value = tuple(value)
    elif kind == 'json':
        if from_flag:
            try:
                value = json.loads(value)
            except json.JSONDecodeError as e:
                raise _type_error(spec.name, f'a JSON object ({e.msg})', value) from None
        if not isinstance(value, dict):
            raise _type_error(spec.name, 'a JSON object', value)
    else:
        raise ConfigError(f"option '{spec.name}' has unknown type '{kind}'")
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(f"option '{spec.name}' must be one of {list(spec.choices)}, got {value!r}")
    return value


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def parse_config(command: str, config_file: Union[str, Path, None] = None,
                 flags: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Merge defaults < config file < flags into a validated RunConfig.

    ``flags`` holds only the options given on the command line, as strings.
    """
    if command not in COMMAND_OPTIONS:
        raise ConfigError(f"unknown command '{command}', expected one of {list(COMMAND_OPTIONS)}")
    specs = {spec.name: spec for spec in COMMAND_OPTIONS[command]}
    file_values = read_config_file(config_file) if config_file is not None else {}
    file_command = file_values.pop('command', command)
    if file_command != command:
        raise ConfigError(f"config file is for '{file_command}', not '{command}'")
    flags = dict(flags or {})

    unknown = sorted((set(file_values) | set(flags)) - set(specs))
    if unknown:
        raise ConfigError(f"unknown option(s) for {command}: {', '.join(unknown)}")

    values: Dict[str, Any] = {}
    provenance: Dict[str, str] = {}
    for name, spec in specs.items():
        if name in flags:
            values[name], provenance[name] = coerce(spec, flags[name], from_flag=True), 'flag'
        elif name in file_values:
            values[name], provenance[name] = coerce(spec, file_values[name], from_flag=False), 'file'
        else:
            values[name], provenance[name] = spec.default, 'default'

    missing = [name for name, spec in specs.items() if spec.required and values[name] is None]
    if missing:
        raise ConfigError(f"missing required option(s) for {command}: {', '.join(missing)}")

    config = RunConfig(command, values, provenance)
    logger.info(f"Effective {command} config:")
    for name, value in values.items():
        logger.info(f"  {name} = {value!r} ({provenance[name]})")
    return config


class _Parser(argparse.ArgumentParser):
    """argparse that raises ConfigError instead of exiting"""

    def error(self, message: str) -> None:
        raise ConfigError(message)


def build_parser(commands: Optional[Iterable[str]] = None) -> argparse.ArgumentParser:
    parser = _Parser(prog='ses', description='Sampling-equivariant self-attention toolkit')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)
    for command in commands or COMMAND_OPTIONS:
        sub = subparsers.add_parser(command)
        sub.add_argument('--config', dest='config_file', default=None, help='JSON config file')
        for spec in COMMAND_OPTIONS[command]:
            help_text = spec.help
            if spec.default is not None:
                help_text = f"{help_text} (default: {spec.default})".strip()
            if spec.required:
                help_text = f"{help_text} [required]".strip()
            # values stay strings here; coerce() applies the schema
            sub.add_argument(spec.flag, dest=spec.name, default=argparse.SUPPRESS, help=help_text)
    return parser


def parse_args(argv: Sequence[str]) -> RunConfig:
    namespace = vars(build_parser().parse_args(list(argv)))
    command = namespace.pop('command')
    config_file = namespace.pop('config_file', None)
    return parse_config(command, config_file, namespace)
