import numpy as np
import pytest

from autograd.gradcheck import check_gradients
from scripts import emd_selftest, gradcheck


class TestGradcheckScript:
    @pytest.mark.parametrize('name', ['add', 'mul', 'matmul', 'linear', 'repeat', 'concat', 'softmax',
                                      'unfold', 'maxpool2', 'batch_norm_train', 'batch_norm_eval',
                                      'cross_entropy'])
    def test_op_cases(self, name):
        rng = np.random.default_rng(0)
        loss_fn, tensors = gradcheck.op_cases(rng)[name]
        for result in check_gradients(loss_fn, tensors, rng=rng):
            assert result.relative_error < 1e-4, (name, result.name)

    def test_ses_block_case(self):
        rng = np.random.default_rng(0)
        loss_fn, tensors = gradcheck.block_case(rng, 0, channels=8, k=3)
        assert 'x' in tensors and len(tensors) > 10
        results = check_gradients(loss_fn, tensors, max_coords=8, rng=rng)
        assert max(r.relative_error for r in results) < 1e-4

    def test_report_frame(self, monkeypatch):
        cases = gradcheck.op_cases
        monkeypatch.setattr(gradcheck, 'op_cases', lambda rng: {'add': cases(rng)['add']})
        monkeypatch.setattr(gradcheck, 'block_case', lambda rng, seed, channels, k: cases(rng)['neg'])
        frame = gradcheck.run_gradcheck(seed=3, repeats=2)
        assert set(frame['seed']) == {3, 4}
        assert set(frame['case']) == {'add', 'ses_block'}


class TestEMDSelftest:
    def test_wasserstein_1d(self):
        value = emd_selftest.wasserstein_1d(np.array([0.0]), np.array([1.0]),
                                            np.array([1.0, 3.0]), np.array([0.5, 0.5]))
        assert value == pytest.approx(2.0)

    def test_enumeration_on_assignment(self):
        cost = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert emd_selftest.enumerate_vertices(np.full(2, 0.5), np.full(2, 0.5), cost) == pytest.approx(0.0)
        assert emd_selftest.best_permutation(cost[::-1]) == pytest.approx(0.0)

    def test_enumeration_size_limit(self):
        with pytest.raises(ValueError):
            emd_selftest.enumerate_vertices(np.full(4, 0.25), np.full(4, 0.25), np.ones((4, 4)))

    def test_main_passes(self):
        assert emd_selftest.main(seed=0, instances=20)
