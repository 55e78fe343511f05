import json

import pytest

import main
from models import AEMDReport


def _results(captured):
    return [json.loads(line) for line in captured.out.splitlines() if line.startswith('{')]


def _errors(captured):
    return [line for line in captured.err.splitlines() if line.startswith('error: ')]


TINY = ['--widths', '8', '--blocks-per-stage', '1', '--k', '3', '--epochs', '1', '--batch-size', '4']


class TestMain:
    def test_gen_data(self, tmp_path, capsys):
        code = main.main(['gen-data', '--out', str(tmp_path / 'd'), '--n-per-class', '2',
                          '--side', '32', '--seed', '0'])
        assert code == 0
        assert _results(capsys.readouterr())[-1]['images'] == 8
        assert (tmp_path / 'd' / 'manifest.csv').exists()

    def test_missing_options_exit_two(self, capsys):
        assert main.main(['train']) == 2
        errors = _errors(capsys.readouterr())
        assert len(errors) == 1
        assert errors[0].startswith('error: config: missing required option(s) for train')

    def test_bad_checkpoint_exit_six(self, tmp_path, shapes_dir, capsys):
        code = main.main(['evaluate', '--model', str(tmp_path / 'none'), '--data', str(shapes_dir)])
        assert code == 6
        assert _errors(capsys.readouterr())[0].startswith('error: checkpoint:')

    def test_geometry_error_exit_four(self, tmp_path, shapes_dir, capsys):
        code = main.main(['eval-aemd', '--data', str(shapes_dir), '--sampler', 'uniform',
                          '--transform', 'scale', '--params', '{"factor": 9}', '--n', '2',
                          '--seed', '0', '--out', str(tmp_path / 'r.json')])
        assert code == 4
        assert _errors(capsys.readouterr())[0].startswith('error: geometry:')

    def test_network_sampler_needs_model(self, tmp_path, shapes_dir):
        code = main.main(['eval-aemd', '--data', str(shapes_dir), '--transform', 'rotation',
                          '--seed', '0', '--out', str(tmp_path / 'r.json')])
        assert code == 2

    def test_failed_self_check_exit_code(self, monkeypatch, capsys):
        monkeypatch.setattr(main.gradcheck, 'main', lambda *args: False)
        assert main.main(['gradcheck', '--seed', '0']) == 3
        assert _errors(capsys.readouterr())[0].startswith('error: autograd:')

    def test_unexpected_error_exit_one(self, monkeypatch, capsys):
        def broken(config):
            raise RuntimeError('boom')

        monkeypatch.setitem(main.COMMANDS, 'emd-selftest', broken)
        assert main.main(['emd-selftest', '--seed', '0']) == 1
        assert _errors(capsys.readouterr()) == ['error: internal: RuntimeError: boom']

    def test_static_sampler_report(self, tmp_path, shapes_dir, capsys):
        out = tmp_path / 'uniform.json'
        code = main.main(['eval-aemd', '--data', str(shapes_dir), '--sampler', 'uniform',
                          '--transform', 'identity', '--n', '3', '--seed', '1', '--out', str(out)])
        assert code == 0
        report = AEMDReport.read_json(out)
        assert len(report.records) == 3
        assert report.aggregate == pytest.approx(0.0, abs=1e-9)
        assert _results(capsys.readouterr())[-1]['aemd'] == report.aggregate


class TestPipeline:
    def test_train_evaluate_aemd_export(self, tmp_path, shapes_dir, capsys):
        run = tmp_path / 'run'
        assert main.main(['train', '--data', str(shapes_dir), '--out', str(run), '--seed', '0'] + TINY) == 0
        trained = _results(capsys.readouterr())[-1]
        assert trained['epochs'] == 1
        assert trained['seed'] == 0
        assert {'initial_loss', 'final_loss', 'val_acc'} <= set(trained)
        saved = json.loads((run / 'run_config.json').read_text())
        assert saved['command'] == 'train'
        assert saved['widths'] == [8]

        checkpoint = str(run / 'checkpoint')
        assert main.main(['evaluate', '--model', checkpoint, '--data', str(shapes_dir)]) == 0
        assert _results(capsys.readouterr())[-1]['count'] == 4

        report_path = run / 'rotation.json'
        assert main.main(['eval-aemd', '--model', checkpoint, '--data', str(shapes_dir),
                          '--transform', 'rotation', '--n', '2', '--seed', '0',
                          '--out', str(report_path)]) == 0
        report = AEMDReport.read_json(report_path)
        assert report.sampler == 'network'
        assert report.alpha == pytest.approx(2.0 / 32)
        assert report.aggregate >= 0.0

        image = shapes_dir / 'images' / 'disk_00000.pgm'
        assert main.main(['export-masks', '--model', checkpoint, '--image', str(image),
                          '--layer', '0', '--row', '10', '--col', '12', '--out', str(run / 'masks')]) == 0
        assert len(_results(capsys.readouterr())[-1]['overlays']) == 2
