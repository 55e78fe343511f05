import numpy as np
import pytest
from numpy.testing import assert_allclose

from autograd import Tensor, backward, no_grad, ops
from autograd.gradcheck import check_gradients
from layers import (
    Linear,
    SESLayer,
    aggregate,
    conv_parameter_count,
    embed_transformation,
    regress_masks,
    ses_parameter_count,
)
from layers.module import Sequential
from layers.ses_layer import checkpointed_masks, gamma_forward
from models import SESLayerConfig
from utils import ConfigError, ShapeError


def _oracle_aggregate(v, w, k, r3):
    """Direct loop over channels, positions and footprint cells"""
    c_v, height, width = v.shape
    pad = (k - 1) // 2
    padded = np.pad(v, ((0, 0), (pad, pad), (pad, pad)))
    out = np.zeros_like(v)
    for c in range(c_v):
        for row in range(height):
            for col in range(width):
                for dy in range(k):
                    for dx in range(k):
                        out[c, row, col] += w[c // r3, dy * k + dx, row, col] * padded[c, row + dy, col + dx]
    return out


@pytest.fixture
def layer(rng):
    return SESLayer(SESLayerConfig(c_in=8, c_out=8, k=3, r1=1, r2=4, r3=4), rng)


class TestMaskRegression:
    def test_footprint_distributions_sum_to_one(self, layer, rng):
        x = Tensor(rng.normal(size=(2, 8, 6, 6)))
        masks = regress_masks(layer, x, x).data
        assert masks.shape == (2, 2, 9, 6, 6)
        assert np.all(masks >= 0)
        assert_allclose(masks.sum(axis=2), 1.0, atol=1e-12)

    def test_constant_input_gives_uniform_interior_masks(self, layer, rng):
        x = Tensor(np.broadcast_to(rng.normal(size=(1, 8, 1, 1)), (2, 8, 7, 7)))
        masks = regress_masks(layer, x, x).data
        assert_allclose(masks[..., 1:-1, 1:-1], 1.0 / 9, atol=1e-12)

    def test_per_image_form(self, layer, rng):
        layer.eval()
        x = rng.normal(size=(8, 5, 5))
        single = regress_masks(layer, Tensor(x), Tensor(x)).data
        batched = regress_masks(layer, Tensor(x[None]), Tensor(x[None])).data[0]
        assert_allclose(single, batched)

    def test_channel_mismatch(self, layer):
        x = Tensor(np.ones((1, 4, 5, 5)))
        with pytest.raises(ShapeError):
            regress_masks(layer, x, x)

    def test_identity_gamma_puts_mass_on_low_key(self, rng):
        layer = SESLayer(SESLayerConfig(c_in=4, c_out=4, k=3, r1=1, r2=4, r3=4), rng)
        layer.gamma_mlp = Sequential()
        for lin in (layer.lin_q, layer.lin_k):
            lin.weight.data[...] = [[1.0, 0.0, 0.0, 0.0]]
            lin.bias.data[...] = 0.0
        q_src = np.zeros((1, 4, 5, 5))
        k_src = np.zeros((1, 4, 5, 5))
        k_src[0, 0, 1, 3] = -1000.0
        masks = regress_masks(layer, Tensor(q_src), Tensor(k_src)).data
        # from center (2, 2) the key at (1, 3) is footprint cell dy=0, dx=2
        assert masks[0, 0, 2, 2, 2] == pytest.approx(1.0, abs=1e-12)
        assert masks[0, 0, :, 2, 2].sum() == pytest.approx(1.0, abs=1e-12)


class TestCheckpointedMasks:
    CONFIG = SESLayerConfig(c_in=8, c_out=8, k=3, r1=1, r2=4, r3=4)

    def _inputs(self, seed):
        rng = np.random.default_rng(seed)
        return (Tensor(rng.normal(size=(2, 2, 5, 5)), requires_grad=True),
                Tensor(rng.normal(size=(2, 2, 5, 5)), requires_grad=True),
                Tensor(rng.normal(size=(2, 2, 9, 5, 5))))

    def test_forward_matches_direct(self):
        layer = SESLayer(self.CONFIG, np.random.default_rng(3))
        queries, keys, _ = self._inputs(0)
        with no_grad():
            direct = gamma_forward(layer, queries, keys, update_stats=False).data
        assert_allclose(checkpointed_masks(layer, queries, keys).data, direct, rtol=0, atol=0)

    def test_gradients_match_full_tape(self):
        taped = SESLayer(self.CONFIG, np.random.default_rng(3))
        replayed = SESLayer(self.CONFIG, np.random.default_rng(3))
        q_a, k_a, weights = self._inputs(0)
        q_b, k_b, _ = self._inputs(0)
        backward(ops.sum(ops.mul(gamma_forward(taped, q_a, k_a), weights)))
        backward(ops.sum(ops.mul(checkpointed_masks(replayed, q_b, k_b), weights)))
        assert_allclose(q_b.grad.data, q_a.grad.data, atol=1e-12)
        assert_allclose(k_b.grad.data, k_a.grad.data, atol=1e-12)
        for (name, a), (_, b) in zip(taped.named_parameters(), replayed.named_parameters()):
            if a.grad is None:
                assert b.grad is None, name
            else:
                assert_allclose(b.grad.data, a.grad.data, atol=1e-12, err_msg=name)

    def test_running_statistics_move_once_per_forward(self, rng):
        trained = SESLayer(self.CONFIG, np.random.default_rng(3))
        reference = SESLayer(self.CONFIG, np.random.default_rng(3))
        x = rng.normal(size=(2, 8, 5, 5))
        backward(ops.sum(trained(Tensor(x, requires_grad=True), Tensor(x))))
        with no_grad():
            reference(Tensor(x), Tensor(x))
        for (name, a), (_, b) in zip(trained.named_buffers(), reference.named_buffers()):
            assert_allclose(a, b, rtol=0, atol=0, err_msg=name)


class TestAggregate:
    def test_one_hot_center_is_identity(self, rng):
        v = rng.normal(size=(2, 4, 5, 5))
        w = np.zeros((2, 2, 9, 5, 5))
        w[:, :, 4] = 1.0
        assert_allclose(aggregate(Tensor(v), Tensor(w), 3, 2).data, v)

    def test_uniform_mask_is_box_mean(self, rng):
        v = rng.normal(size=(3, 5, 5))
        w = np.full((1, 9, 5, 5), 1.0 / 9)
        assert_allclose(aggregate(Tensor(v), Tensor(w), 3, 3).data, _oracle_aggregate(v, w, 3, 3))

    def test_shared_masks_match_loop(self, rng):
        v = rng.normal(size=(6, 4, 5))
        w = rng.dirichlet(np.ones(9), size=(2, 4, 5)).transpose(0, 3, 1, 2)
        assert_allclose(aggregate(Tensor(v), Tensor(w), 3, 3).data, _oracle_aggregate(v, w, 3, 3))

    def test_channel_arithmetic(self, rng):
        with pytest.raises(ShapeError):
            aggregate(Tensor(np.ones((1, 5, 4, 4))), Tensor(np.ones((1, 2, 9, 4, 4))), 3, 2)

    def test_gradients_match_central_differences(self, rng):
        v = Tensor(rng.normal(size=(2, 4, 4, 5)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 2, 9, 4, 5)), requires_grad=True)
        weights = Tensor(rng.normal(size=(2, 4, 4, 5)))
        results = check_gradients(lambda: ops.sum(ops.mul(aggregate(v, w, 3, 2), weights)),
                                  {'v': v, 'w': w}, max_coords=40, rng=rng)
        assert max(r.relative_error for r in results) < 1e-4


class TestTransformationEmbedding:
    @pytest.fixture
    def masks(self, rng):
        return rng.dirichlet(np.ones(9), size=(1, 2, 4, 4)).transpose(0, 1, 4, 2, 3)

    def _zeta(self, rng, weights):
        zeta = Linear(10, 1, rng, feature_axis=2)
        zeta.weight.data[...] = np.asarray(weights)[None]
        zeta.bias.data[...] = 0.0
        return zeta

    def test_projection_ignores_mask(self, rng, masks):
        v = rng.normal(size=(1, 4, 4, 4))
        zeta = self._zeta(rng, [1.0] + [0.0] * 9)
        assert_allclose(embed_transformation(Tensor(v), Tensor(masks), zeta).data, v)

    def test_mask_sum_is_one(self, rng, masks):
        v = rng.normal(size=(1, 4, 4, 4))
        zeta = self._zeta(rng, [0.0] + [1.0] * 9)
        assert_allclose(embed_transformation(Tensor(v), Tensor(masks), zeta).data, 1.0, atol=1e-12)

    def test_additive_in_feature_slot(self, rng, masks):
        zeta = Linear(10, 1, rng, feature_axis=2)
        a, b = rng.normal(size=(2, 1, 4, 4, 4))
        w = Tensor(masks)
        lhs = embed_transformation(Tensor(a + b), w, zeta).data
        rhs = (embed_transformation(Tensor(a), w, zeta).data + embed_transformation(Tensor(b), w, zeta).data
               - embed_transformation(Tensor(np.zeros_like(a)), w, zeta).data)
        assert_allclose(lhs, rhs, atol=1e-12)

    def test_pass_through(self, rng, masks):
        v = rng.normal(size=(1, 4, 4, 4))
        assert_allclose(embed_transformation(Tensor(v), Tensor(masks), None).data, v)

    def test_channel_permutation_commutes(self, rng):
        zeta = Linear(10, 1, rng, feature_axis=2)
        v = rng.normal(size=(1, 4, 3, 3))
        w = rng.dirichlet(np.ones(9), size=(1, 4, 3, 3)).transpose(0, 1, 4, 2, 3)
        perm = np.array([2, 0, 3, 1])
        out = embed_transformation(Tensor(v), Tensor(w), zeta).data
        permuted = embed_transformation(Tensor(v[:, perm]), Tensor(w[:, perm]), zeta).data
        assert_allclose(permuted, out[:, perm])

    def test_gradients_match_central_differences(self, rng, masks):
        zeta = Linear(10, 1, rng, feature_axis=2)
        v = Tensor(rng.normal(size=(1, 4, 4, 4)), requires_grad=True)
        w = Tensor(masks, requires_grad=True)
        weights = Tensor(rng.normal(size=(1, 4, 4, 4)))
        tensors = {'v': v, 'w': w, 'weight': zeta.weight, 'bias': zeta.bias}
        results = check_gradients(lambda: ops.sum(ops.mul(embed_transformation(v, w, zeta), weights)),
                                  tensors, max_coords=40, rng=rng)
        assert max(r.relative_error for r in results) < 1e-4


class TestSESLayer:
    def test_output_shape(self, rng):
        layer = SESLayer(SESLayerConfig(c_in=8, c_out=12, k=3, r1=2, r2=4, r3=2), rng)
        out = layer(Tensor(rng.normal(size=(2, 8, 5, 6))), Tensor(rng.normal(size=(2, 8, 5, 6))))
        assert out.shape == (2, 12, 5, 6)

    def test_translation_equivariance_away_from_borders(self, layer, rng):
        layer.eval()
        x = rng.normal(size=(1, 8, 12, 12))
        shifted = np.zeros_like(x)
        shifted[..., 2:, 1:] = x[..., :-2, :-1]
        with no_grad():
            out = layer(Tensor(x), Tensor(x)).data
            out_shifted = layer(Tensor(shifted), Tensor(shifted)).data
        # cells whose 3x3 footprints avoid padding in both images
        assert_allclose(out_shifted[..., 3:11, 2:11], out[..., 1:9, 1:10], atol=1e-12)

    def test_gradients_reach_every_parameter(self, layer, rng):
        x = Tensor(rng.normal(size=(2, 8, 5, 5)), requires_grad=True)
        backward(ops.sum(layer(x, x)))
        assert x.grad is not None
        for name, param in layer.named_parameters():
            assert param.grad is not None, name


class TestParameterCount:
    def test_matches_instantiated_layer(self, rng):
        for config in (SESLayerConfig(c_in=16, c_out=16, k=7, r1=1, r2=4, r3=4),
                       SESLayerConfig(c_in=8, c_out=16, k=3, r1=2, r2=2, r3=2,
                                      positional_encoding=True, transformation_embedding=False)):
            assert SESLayer(config, rng).parameter_count() == ses_parameter_count(config)

    def test_fewer_parameters_than_convolution(self):
        config = SESLayerConfig(c_in=256, c_out=256, k=7, r1=4, r2=16, r3=8)
        assert ses_parameter_count(config) < conv_parameter_count(256, 256, 7)

    @pytest.mark.parametrize('kwargs', [
        {'c_in': 8, 'c_out': 8, 'k': 4},
        {'c_in': 8, 'c_out': 8, 'r2': 3},
        {'c_in': 8, 'c_out': 8, 'r1': 2, 'r3': 3},
        {'c_in': 0, 'c_out': 8},
    ])
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ConfigError):
            SESLayerConfig(**kwargs)
