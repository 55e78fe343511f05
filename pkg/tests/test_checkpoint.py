import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from autograd import Tensor, no_grad, save_tensor
from layers import SESNet, load_checkpoint, read_manifest, save_checkpoint
from models import NetworkConfig
from utils import CheckpointError


@pytest.fixture
def perturbed_net(tiny_network, rng):
    net = SESNet(tiny_network, seed=1)
    for _, param in net.named_parameters():
        param.data += rng.normal(scale=0.1, size=param.shape)
    for _, buffer in net.named_buffers():
        buffer += rng.uniform(0.0, 0.5, size=buffer.shape)
    return net.eval()


class TestCheckpoint:
    def test_restored_network_predicts_identically(self, tmp_path, perturbed_net, rng):
        save_checkpoint(perturbed_net, tmp_path / 'ckpt', extra={'note': 'kept'})
        restored = load_checkpoint(tmp_path / 'ckpt')
        assert not restored.training
        x = Tensor(rng.uniform(size=(2, 1, 16, 16)))
        with no_grad():
            assert_array_equal(restored(x).data, perturbed_net(x).data)
        assert read_manifest(tmp_path / 'ckpt')['extra'] == {'note': 'kept'}

    def test_network_config_survives(self, tmp_path, perturbed_net):
        save_checkpoint(perturbed_net, tmp_path)
        manifest = read_manifest(tmp_path)
        assert NetworkConfig.from_dict(manifest['network']) == perturbed_net.config
        assert [entry['name'] for entry in manifest['parameters']] == \
            [name for name, _ in perturbed_net.named_parameters()]

    def test_missing_parameter(self, tmp_path, perturbed_net):
        save_checkpoint(perturbed_net, tmp_path)
        manifest = json.loads((tmp_path / 'manifest.json').read_text())
        manifest['parameters'] = manifest['parameters'][1:]
        (tmp_path / 'manifest.json').write_text(json.dumps(manifest))
        with pytest.raises(CheckpointError, match='mismatch'):
            load_checkpoint(tmp_path)

    def test_shape_mismatch(self, tmp_path, perturbed_net):
        save_checkpoint(perturbed_net, tmp_path)
        entry = read_manifest(tmp_path)['parameters'][0]
        save_tensor(Tensor(np.zeros((3, 3, 3))), tmp_path / entry['file'])
        with pytest.raises(CheckpointError, match='stored shape'):
            load_checkpoint(tmp_path)

    def test_not_a_checkpoint(self, tmp_path):
        (tmp_path / 'manifest.json').write_text(json.dumps({'format': 'other'}))
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / 'nowhere')
