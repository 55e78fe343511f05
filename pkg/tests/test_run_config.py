import json

import pytest

from config.run_config import COMMAND_OPTIONS, RunConfig, parse_args, parse_config
from utils import ConfigError


def _write(tmp_path, data, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestParseConfig:
    def test_empty_train_config_lists_missing(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            parse_config('train', _write(tmp_path, {}))
        message = str(excinfo.value)
        assert 'data' in message and 'out' in message and 'seed' in message

    def test_defaults_apply(self):
        config = parse_config('train', flags={'data': 'd', 'out': 'o', 'seed': '3'})
        assert config.seed == 3
        assert config.epochs == 20
        assert config.widths == (32, 64)
        assert config.rnm_routing == 'qk'
        assert config.provenance['epochs'] == 'default'

    def test_flags_override_file(self, tmp_path):
        path = _write(tmp_path, {'data': 'd', 'out': 'o', 'seed': 1, 'lr': 0.1, 'epochs': 3})
        config = parse_config('train', path, {'lr': '0.01', 'widths': '16,32'})
        assert config.lr == 0.01
        assert config.epochs == 3
        assert config.widths == (16, 32)
        assert config.provenance['lr'] == 'flag'
        assert config.provenance['epochs'] == 'file'
        assert config.provenance['momentum'] == 'default'

    def test_effective_config_reparses_equal(self, tmp_path):
        config = parse_config('eval-aemd', flags={'data': 'd', 'transform': 'rotation', 'seed': '0',
                                                  'out': 'r.json', 'params': '{"angle": 90}'})
        path = tmp_path / 'effective.json'
        config.to_json(path)
        assert parse_config('eval-aemd', path) == config

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match='unknown option'):
            parse_config('evaluate', _write(tmp_path, {'model': 'm', 'data': 'd', 'batch': 4}))

    @pytest.mark.parametrize('key,value', [('epochs', 'ten'), ('epochs', 2.5), ('lr', True),
                                           ('widths', []), ('ablation', 'conv')])
    def test_type_and_choice_mismatch(self, tmp_path, key, value):
        data = {'data': 'd', 'out': 'o', 'seed': 0, key: value}
        with pytest.raises(ConfigError):
            parse_config('train', _write(tmp_path, data))

    def test_file_for_another_command(self, tmp_path):
        with pytest.raises(ConfigError, match="for 'train'"):
            parse_config('evaluate', _write(tmp_path, {'command': 'train'}))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"seed": ')
        with pytest.raises(ConfigError, match='not valid JSON'):
            parse_config('gradcheck', path)

    def test_every_command_has_a_seed_or_model(self):
        for command, specs in COMMAND_OPTIONS.items():
            names = {spec.name for spec in specs}
            assert 'seed' in names or 'model' in names, command


class TestParseArgs:
    def test_flags_become_typed_values(self):
        config = parse_args(['gen-data', '--out', 'data', '--n-per-class', '5', '--seed', '2'])
        assert isinstance(config, RunConfig)
        assert config.command == 'gen-data'
        assert config.n_per_class == 5
        assert config.side == 64

    def test_config_file_flag(self, tmp_path):
        path = _write(tmp_path, {'seed': 4, 'instances': 10})
        config = parse_args(['emd-selftest', '--config', str(path), '--tolerance', '1e-6'])
        assert config.instances == 10
        assert config.tolerance == 1e-6
        assert config.provenance == {'seed': 'file', 'instances': 'file', 'tolerance': 'flag'}

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            parse_args(['fly'])

    def test_unknown_flag(self):
        with pytest.raises(ConfigError):
            parse_args(['gradcheck', '--seed', '0', '--speed', '3'])

    def test_bad_choice(self):
        with pytest.raises(ConfigError):
            parse_args(['eval-aemd', '--data', 'd', '--transform', 'twist', '--seed', '0', '--out', 'o'])
