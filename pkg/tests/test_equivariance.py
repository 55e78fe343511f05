import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from geometry import ImageGrid, make_transform
from layers import SESNet
from models import AEMDRecord, AEMDReport, SamplingGraph
from services import (
    IntensityMaskSampler,
    LocationSampler,
    NetworkSampler,
    SamplerProbe,
    UniformMaskSampler,
    aemd,
    alpha_for,
    emd,
    extract_graph,
    ideal_graph,
    lift_mask,
)
from services.samplers import footprint_offsets
from utils import HarnessError


def _images(rng, count, side=16):
    return [ImageGrid.from_array(rng.uniform(size=(side, side))) for _ in range(count)]


def _as_set(graph):
    return {(round(x, 9), round(y, 9)): round(w, 12) for (x, y), w in zip(graph.points, graph.weights)}


class TestLifting:
    def test_uniform_mask_at_stride_four(self):
        graph = lift_mask(np.full(9, 1.0 / 9), 3, 4, (8, 8))
        expected = {(x, y) for x in (30.0, 34.0, 38.0) for y in (30.0, 34.0, 38.0)}
        assert set(_as_set(graph)) == expected
        assert_allclose(graph.weights, 1.0 / 9)
        assert_allclose(graph.centroid, [34.0, 34.0])

    def test_one_hot_mask_is_single_point(self):
        mask = np.zeros(9)
        mask[5] = 1.0  # one cell right of center
        graph = lift_mask(mask, 3, 4, (8, 8))
        assert len(graph) == 1
        assert_allclose(graph.points[0], [38.0, 34.0])

    def test_footprint_order(self):
        offsets = footprint_offsets(3)
        assert offsets[0].tolist() == [-1, -1]
        assert offsets[5].tolist() == [0, 1]
        assert offsets[8].tolist() == [1, 1]

    def test_mask_size_checked(self):
        with pytest.raises(HarnessError):
            lift_mask(np.ones(8) / 8, 3, 1, (4, 4))


class TestSamplers:
    def test_location_on_cell_centers(self):
        sampler = LocationSampler(offsets=[[0.0, 0.0]])
        graph = sampler.graph_at(2, (5, 5))
        assert len(graph) == 1
        assert_allclose(graph.points[0], [11.0, 11.0])

    def test_location_splats_fractional_offsets(self):
        sampler = LocationSampler(offsets=[[0.25, 0.0]])
        graph = sampler.graph_at(1, (5, 5))
        assert _as_set(graph) == {(5.5, 5.5): 0.75, (6.5, 5.5): 0.25}
        assert sampler.reach(0) == 1

    def test_default_location_grid(self):
        graph = LocationSampler().graph_at(1, (4, 4))
        assert len(graph) == 9
        assert_allclose(graph.centroid, [4.5, 4.5])

    def test_intensity_masks_follow_content(self):
        pixels = np.zeros((8, 8))
        pixels[3, 5] = 1.0
        graph = IntensityMaskSampler(k=3).graphs(ImageGrid.from_array(pixels), 1, (3, 4))[0][0]
        heaviest = graph.points[np.argmax(graph.weights)]
        assert_allclose(heaviest, [5.5, 3.5])
        assert graph.weights.max() > 0.99

    def test_uniform_masks(self, rng):
        sampler = UniformMaskSampler(k=5, channels=2)
        graphs = sampler.graphs(_images(rng, 1)[0], 1, (6, 6))[0]
        assert len(graphs) == 2
        assert_allclose(graphs[0].weights, 1.0 / 25)

    def test_border_center_rejected(self, rng):
        with pytest.raises(HarnessError):
            UniformMaskSampler(k=3).graphs(_images(rng, 1)[0], 1, (0, 5))

    def test_network_masks_per_layer(self, rng, tiny_network):
        sampler = NetworkSampler(SESNet(tiny_network, seed=0))
        assert sampler.strides() == [1]
        graphs = sampler.graphs(_images(rng, 1)[0], 1, (5, 5))
        assert list(graphs) == [0]
        assert len(graphs[0]) == 2
        for graph in graphs[0]:
            assert graph.weights.sum() == pytest.approx(1.0)

    def test_probe_validation(self):
        sampler = UniformMaskSampler(k=3, strides=(1, 2))
        with pytest.raises(HarnessError):
            SamplerProbe(sampler, 4, 0)
        with pytest.raises(HarnessError):
            SamplerProbe(sampler, 2, 0)

    def test_extract_graph(self, rng):
        probe = SamplerProbe(UniformMaskSampler(k=3), 1, 0)
        image = _images(rng, 1)[0]
        assert len(extract_graph(probe, image, (5, 5), 0)) == 9
        with pytest.raises(HarnessError):
            extract_graph(probe, image, (5, 5), 1)


class TestIdealGraph:
    def test_identity(self, rng):
        graph = SamplingGraph.from_masses(rng.uniform(0, 16, (5, 2)), rng.uniform(0.1, 1, 5))
        assert emd(ideal_graph(graph, make_transform('identity')), graph) == pytest.approx(0.0, abs=1e-12)

    def test_quarter_turn_keeps_weights(self):
        graph = SamplingGraph([[9.0, 8.0], [8.0, 8.0]], [0.25, 0.75])
        turned = ideal_graph(graph, make_transform('rotation', {'angle': 90.0}, (8.0, 8.0)))
        assert _as_set(turned) == {(8.0, 9.0): 0.25, (8.0, 8.0): 0.75}


class TestAEMD:
    def test_alpha(self):
        assert alpha_for(224) == pytest.approx(1.0 / 112)

    def test_identity_transform_network(self, rng, tiny_network):
        sampler = NetworkSampler(SESNet(tiny_network, seed=0))
        report = aemd(sampler, _images(rng, 3), 'identity', 3, np.random.default_rng(0))
        assert len(report.records) == 3
        assert report.aggregate < 1e-9

    def test_identity_transform_uniform(self, rng):
        report = aemd(UniformMaskSampler(k=3), _images(rng, 2), 'identity', 2, np.random.default_rng(0))
        assert report.aggregate < 1e-9

    def test_uniform_skew_matches_closed_form(self):
        images = [ImageGrid.from_array(np.zeros((32, 32))) for _ in range(2)]
        params = {'shear': 0.3, 'direction': 'x'}
        report = aemd(UniformMaskSampler(k=3), images, 'skew', 2, np.random.default_rng(0), params=params)

        offsets = footprint_offsets(3)[:, ::-1].astype(np.float64)
        shear = make_transform('skew', params).linear
        expected = alpha_for(32) * emd(SamplingGraph(offsets @ shear.T, np.full(9, 1.0 / 9)),
                                       SamplingGraph(offsets, np.full(9, 1.0 / 9)))
        assert expected > 0
        assert report.aggregate == pytest.approx(expected, abs=1e-6)

    def test_intensity_sampler_reflects_exactly(self, rng):
        images = _images(rng, 4, side=32)
        report = aemd(IntensityMaskSampler(k=3), images, 'reflection', 4, np.random.default_rng(1))
        assert report.aggregate < 1e-9

    def test_reproducible_for_a_seed(self, rng):
        images = _images(rng, 3, side=24)
        first = aemd(LocationSampler(), images, 'rotation', 3, np.random.default_rng(5), seed=5)
        second = aemd(LocationSampler(), images, 'rotation', 3, np.random.default_rng(5), seed=5)
        assert first.aggregate == second.aggregate
        assert [r.center for r in first.records] == [r.center for r in second.records]
        assert [r.transform_params for r in first.records] == [r.transform_params for r in second.records]

    def test_fixed_params_are_recorded(self, rng):
        report = aemd(UniformMaskSampler(k=3), _images(rng, 2), 'rotation', 2,
                      np.random.default_rng(0), params={'angle': 90.0})
        assert all(r.transform_params == {'angle': 90.0} for r in report.records)
        assert report.transform_kind == 'rotation'
        assert report.sampler == 'uniform'

    @pytest.mark.parametrize('n', [0, 4])
    def test_image_count_checked(self, rng, n):
        with pytest.raises(HarnessError):
            aemd(UniformMaskSampler(k=3), _images(rng, 3), 'identity', n, np.random.default_rng(0))

    def test_mixed_sizes_rejected(self, rng):
        images = _images(rng, 1, side=16) + _images(rng, 1, side=20)
        with pytest.raises(HarnessError):
            aemd(UniformMaskSampler(k=3), images, 'identity', 2, np.random.default_rng(0))


class TestReport:
    def _report(self):
        records = [
            AEMDRecord(0, {'angle': 10.0}, 1, (4, 4), (4, 5), {0: [1.0, 3.0], 1: [4.0]}),
            AEMDRecord(1, {'angle': -5.0}, 2, (3, 3), (3, 3), {2: [0.5, 0.5, 2.0]}),
        ]
        return AEMDReport('rotation', alpha=0.5, image_side=4, seed=0, sampler='network',
                          records=records).finalize()

    def test_aggregate_is_nested_mean(self):
        report = self._report()
        # image 0: mean(2.0, 4.0) = 3.0; image 1: 1.0
        assert report.aggregate == pytest.approx(0.5 * (3.0 + 1.0) / 2)
        per_layer = report.to_frame().query('image == 0').groupby('layer')['emd'].mean()
        assert per_layer.mean() == pytest.approx(3.0)

    def test_frame_has_one_row_per_channel(self):
        frame = self._report().to_frame()
        assert len(frame) == 6
        assert_array_equal(frame['layer'].unique(), [0, 1, 2])

    def test_json_file_keeps_breakdown(self, tmp_path):
        report = self._report()
        report.write_json(tmp_path / 'report.json')
        loaded = AEMDReport.read_json(tmp_path / 'report.json')
        assert loaded.aggregate == report.aggregate
        assert loaded.records[0].layer_emds == {0: [1.0, 3.0], 1: [4.0]}
        assert loaded.records[1].center == (3, 3)
        assert loaded.recompute_aggregate() == pytest.approx(loaded.aggregate)
