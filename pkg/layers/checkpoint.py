"""Checkpoints: one SEST file per parameter/buffer plus a JSON manifest that
lists them in network order together with the network config."""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from autograd import Tensor, load_tensor, save_tensor
from layers.network import SESNet
from models.configs import NetworkConfig
from utils.errors import CheckpointError, ConfigError
from utils.logger import setup_logger


logger = setup_logger('checkpoint')

MANIFEST = 'manifest.json'
FORMAT = 'ses-checkpoint'


def save_checkpoint(net: SESNet, directory: Union[str, Path],
                    extra: Optional[Dict[str, Any]] = None) -> Path:
    directory = Path(directory)
    tensor_dir = directory / 'tensors'
    tensor_dir.mkdir(parents=True, exist_ok=True)

    def entries(named, kind):
        listed = []
        for index, (name, value) in enumerate(named):
            data = value.data if isinstance(value, Tensor) else value
            filename = f"{kind}_{index:03d}.sest"
            save_tensor(Tensor(data), tensor_dir / filename)
            listed.append({'name': name, 'file': f"tensors/{filename}", 'shape': list(data.shape)})
        return listed

    manifest = {
        'format': FORMAT,
        'version': 1,
        'seed': net.seed,
        'network': net.config.to_dict(),
        'parameters': entries(net.named_parameters(), 'param'),
        'buffers': entries(net.named_buffers(), 'buffer'),
        'extra': extra or {},
    }
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2))
    logger.info(f"Saved checkpoint with {len(manifest['parameters'])} parameters to {directory}")
    return directory


def read_manifest(directory: Union[str, Path]) -> Dict[str, Any]:
    path = Path(directory) / MANIFEST
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint manifest {path}: {e}") from e
    if manifest.get('format') != FORMAT:
        raise CheckpointError(f"{path} is not a {FORMAT} manifest")
    return manifest


def load_checkpoint(directory: Union[str, Path]) -> SESNet:
    directory = Path(directory)
    manifest = read_manifest(directory)
    try:
        config = NetworkConfig.from_dict(manifest['network'])
    except (KeyError, ConfigError) as e:
        raise CheckpointError(f"checkpoint network config is invalid: {e}") from e
    net = SESNet(config, seed=int(manifest.get('seed', 0)))

    parameters = dict(net.named_parameters())
    buffers = dict(net.named_buffers())
    listed = [entry['name'] for entry in manifest['parameters']]
    if listed != list(parameters):
        missing = sorted(set(parameters) - set(listed))
        unexpected = sorted(set(listed) - set(parameters))
        raise CheckpointError(f"parameter manifest mismatch: missing={missing}, unexpected={unexpected}")

    for entry in manifest['parameters']:
        stored = load_tensor(directory / entry['file'])
        target = parameters[entry['name']]
        if stored.shape != target.shape:
            raise CheckpointError(f"{entry['name']}: stored shape {stored.shape} != {target.shape}")
        target.data[...] = stored.data
    for entry in manifest['buffers']:
        if entry['name'] not in buffers:
            raise CheckpointError(f"unexpected buffer {entry['name']}")
        stored = load_tensor(directory / entry['file'])
        target = buffers[entry['name']]
        if stored.shape != target.shape:
            raise CheckpointError(f"{entry['name']}: stored shape {stored.shape} != {target.shape}")
        np.copyto(target, stored.data)
    logger.info(f"Loaded checkpoint from {directory} ({net.parameter_count()} parameters)")
    return net.eval()
