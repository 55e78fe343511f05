import numpy as np
import pytest
from numpy.testing import assert_array_equal

from geometry import ImageGrid
from layers import SESNet, save_checkpoint
from services import export_masks, render_overlay
from services.mask_export import overlay_filename
from services.samplers import NetworkSampler, footprint_offsets
from utils import HarnessError, read_pgm, read_ppm, to_uint8, to_unit_range, write_pgm


class TestRenderOverlay:
    def test_uniform_mask_paints_footprint_red(self):
        rgb = render_overlay(np.zeros((9, 9)), np.full(9, 1.0 / 9), 3, 1, (4, 4))
        assert_array_equal(rgb[3:6, 3:6], np.broadcast_to([255, 0, 0], (3, 3, 3)))
        outside = np.ones((9, 9), dtype=bool)
        outside[3:6, 3:6] = False
        assert np.all(rgb[outside] == 0)

    def test_one_hot_mask_marks_single_cell(self):
        mask = np.zeros(9)
        mask[0] = 1.0
        rgb = render_overlay(np.full((8, 8), 0.5), mask, 3, 2, (2, 2))
        # top-left footprint cell covers pixels [2:4, 2:4] at stride 2
        assert_array_equal(rgb[2:4, 2:4, 0], 255)
        assert_array_equal(rgb[2:4, 2:4, 1], 0)
        untouched = np.ones((8, 8), dtype=bool)
        untouched[2:4, 2:4] = False
        assert np.all(rgb[untouched] == 128)

    def test_blend_within_one_level(self, rng):
        gray = rng.uniform(size=(7, 7))
        mask = rng.dirichlet(np.ones(9))
        rgb = render_overlay(gray, mask, 3, 1, (3, 3)).astype(float)
        alpha = (mask / mask.max()).reshape(3, 3)
        patch = gray[2:5, 2:5]
        assert np.all(np.abs(rgb[2:5, 2:5, 0] - 255 * (patch + (1 - patch) * alpha)) <= 0.5)
        assert np.all(np.abs(rgb[2:5, 2:5, 1] - 255 * patch * (1 - alpha)) <= 0.5)
        assert_array_equal(rgb[0, :, 0], to_uint8(gray[0]))

    def test_footprint_leaving_image(self):
        with pytest.raises(HarnessError):
            render_overlay(np.zeros((6, 6)), np.full(9, 1.0 / 9), 3, 1, (0, 3))


class TestExportMasks:
    @pytest.fixture
    def image_path(self, tmp_path, rng):
        path = tmp_path / 'input.pgm'
        write_pgm(path, rng.integers(0, 256, size=(16, 16), dtype=np.uint8))
        return path

    def test_one_overlay_per_mask_channel(self, tmp_path, tiny_network, image_path):
        net = SESNet(tiny_network, seed=0)
        written = export_masks(net, image_path, 0, (5, 6), tmp_path / 'out')
        assert [path.name for path in written] == [overlay_filename(0, (5, 6), ch) for ch in range(2)]
        assert written[0].name == 'mask_l0_r5_c6_ch0.ppm'
        assert read_ppm(written[1]).shape == (16, 16, 3)

    def test_from_checkpoint_directory(self, tmp_path, tiny_network, image_path):
        save_checkpoint(SESNet(tiny_network, seed=0), tmp_path / 'ckpt')
        written = export_masks(tmp_path / 'ckpt', image_path, 0, (8, 8), tmp_path / 'out')
        assert len(written) == 2

    def test_layer_out_of_range(self, tmp_path, tiny_network, image_path):
        with pytest.raises(HarnessError):
            export_masks(SESNet(tiny_network, seed=0), image_path, 3, (5, 5), tmp_path)

    def test_border_center(self, tmp_path, tiny_network, image_path):
        with pytest.raises(HarnessError):
            export_masks(SESNet(tiny_network, seed=0), image_path, 0, (0, 5), tmp_path)

    def test_written_overlay_encodes_mask(self, tmp_path, tiny_network, image_path):
        net = SESNet(tiny_network, seed=0)
        center = (7, 9)
        written = export_masks(net, image_path, 0, center, tmp_path / 'out')
        gray = to_unit_range(read_pgm(image_path))
        masks = NetworkSampler(net).masks(ImageGrid.from_array(gray), 1)[0]
        for channel, path in enumerate(written):
            rgb = read_ppm(path).astype(np.float64)
            mask = masks[channel][:, center[0], center[1]]
            for (dy, dx), weight in zip(footprint_offsets(3), mask):
                row, col = center[0] + dy, center[1] + dx
                # R - G = 255 * w / max(w), each channel rounded once
                recovered = (rgb[row, col, 0] - rgb[row, col, 1]) / 255.0
                assert abs(recovered - weight / mask.max()) <= 1.0 / 255 + 1e-12
