# samplers.py

"""Sources of sampling graphs for the AEMD harness.

A sampler exposes, per stride, the layers it probes and for a feature cell
(row, col) one SamplingGraph per mask channel of every such layer. Feature
cell (row, col) at stride d covers the input pixels whose centers average to
(x, y) = (d * (col + 0.5), d * (row + 0.5)).
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from autograd import Tensor, no_grad, ops
from geometry import ImageGrid
from layers import ForwardRecord, SESNet
from models import SamplingGraph
from utils import HarnessError
from utils import setup_logger


logger = setup_logger('samplers')

Cell = Tuple[int, int]

# keeps content-driven masks strictly positive on black regions
INTENSITY_EPS = 1e-6


def lift_cell(row: float, col: float, stride: int) -> np.ndarray:
    """Feature-cell coordinates -> input-pixel (x, y)"""
    return np.array([stride * (col + 0.5), stride * (row + 0.5)])


def footprint_offsets(k: int) -> np.ndarray:
    """(dy, dx) of every footprint cell in mask order j = dy * k + dx, centered"""
    pad = (k - 1) // 2
    dy, dx = np.meshgrid(np.arange(k) - pad, np.arange(k) - pad, indexing='ij')
    return np.stack([dy.ravel(), dx.ravel()], axis=1)


def lift_mask(mask: np.ndarray, k: int, stride: int, center: Cell) -> SamplingGraph:
    """k*k mask at feature cell ``center`` -> graph over input-pixel locations"""
    mask = np.asarray(mask, dtype=np.float64).reshape(-1)
    if mask.size != k * k:
        raise HarnessError(f"mask has {mask.size} cells, footprint k={k} needs {k * k}")
    offsets = footprint_offsets(k)
    rows = center[0] + offsets[:, 0]
    cols = center[1] + offsets[:, 1]
    points = np.stack([stride * (cols + 0.5), stride * (rows + 0.5)], axis=1)
    return SamplingGraph.from_masses(points, mask)


class Sampler(ABC):
    """Produces sampling graphs at feature cells of an image"""

    name = 'sampler'

    @abstractmethod
    def strides(self) -> List[int]:
        ...

    @abstractmethod
    def layers(self, stride: int) -> List[int]:
        ...

    @abstractmethod
    def reach(self, layer: int) -> int:
        """Footprint radius in feature cells"""

    @abstractmethod
    def graphs(self, image: ImageGrid, stride: int, center: Cell) -> Dict[int, List[SamplingGraph]]:
        """layer -> one graph per mask channel at ``center``"""

    def stride_reach(self, stride: int) -> int:
        return max(self.reach(layer) for layer in self.layers(stride))

    def feature_shape(self, stride: int, height: int, width: int) -> Tuple[int, int]:
        return -(-height // stride), -(-width // stride)

    def check_center(self, stride: int, center: Cell, height: int, width: int) -> None:
        rows, cols = self.feature_shape(stride, height, width)
        reach = self.stride_reach(stride)
        row, col = center
        if not (reach <= row < rows - reach and reach <= col < cols - reach):
            raise HarnessError(f"center {center} at stride {stride} needs {reach} cells of margin "
                               f"inside a {rows}x{cols} feature map")


class MaskSampler(Sampler):
    """Samplers whose graphs are k*k masks on the feature grid"""

    @abstractmethod
    def kernel(self, layer: int) -> int:
        ...

    @abstractmethod
    def masks(self, image: ImageGrid, stride: int) -> Dict[int, np.ndarray]:
        """layer -> masks [c_w, k*k, H, W] at ``stride``"""

    def reach(self, layer: int) -> int:
        return (self.kernel(layer) - 1) // 2

    def graphs(self, image: ImageGrid, stride: int, center: Cell) -> Dict[int, List[SamplingGraph]]:
        self.check_center(stride, center, image.height, image.width)
        row, col = center
        return {
            layer: [lift_mask(channel_masks[:, row, col], self.kernel(layer), stride, center)
                    for channel_masks in layer_masks]
            for layer, layer_masks in self.masks(image, stride).items()
        }


class NetworkSampler(MaskSampler):
    """Masks recorded from the SES layers of a network in eval mode.

    One image per forward, so batch statistics never couple probes.
    """

    def __init__(self, net: SESNet, name: str = 'network'):
        self.net = net.eval()
        self.name = name
        self._by_stride = net.ses_layers_by_stride()

    def strides(self) -> List[int]:
        return sorted(self._by_stride)

    def layers(self, stride: int) -> List[int]:
        if stride not in self._by_stride:
            raise HarnessError(f"network has no SES layers at stride {stride}")
        return list(self._by_stride[stride])

    def kernel(self, layer: int) -> int:
        return self.net.blocks[layer].ses.config.k

    def masks(self, image: ImageGrid, stride: int) -> Dict[int, np.ndarray]:
        if image.channels != self.net.config.in_channels:
            raise HarnessError(f"network expects {self.net.config.in_channels} channels, "
                               f"image has {image.channels}")
        record = ForwardRecord()
        with no_grad():
            self.net(Tensor(image.array()[None]), record)
        return {layer: record.masks[layer][0] for layer in self.layers(stride)}


class UniformMaskSampler(MaskSampler):
    """Fixed uniform k*k mask: the sampling graph of a plain convolution"""

    name = 'uniform'

    def __init__(self, k: int = 3, strides: Sequence[int] = (1,), channels: int = 1):
        if k < 1 or k % 2 == 0:
            raise HarnessError(f"footprint k must be odd and positive, got {k}")
        self.k = k
        self._strides = list(strides)
        self.channels = channels

    def strides(self) -> List[int]:
        return list(self._strides)

    def layers(self, stride: int) -> List[int]:
        return [self._strides.index(stride)]

    def kernel(self, layer: int) -> int:
        return self.k

    def masks(self, image: ImageGrid, stride: int) -> Dict[int, np.ndarray]:
        rows, cols = self.feature_shape(stride, image.height, image.width)
        uniform = np.full((self.channels, self.k * self.k, rows, cols), 1.0 / (self.k * self.k))
        return {self.layers(stride)[0]: uniform}


class IntensityMaskSampler(MaskSampler):
    """Mask = normalized local intensity of the (block-averaged) image.

    A fixed function of footprint content, so the mask moves with the image.
    """

    name = 'intensity'

    def __init__(self, k: int = 5, strides: Sequence[int] = (1,)):
        if k < 1 or k % 2 == 0:
            raise HarnessError(f"footprint k must be odd and positive, got {k}")
        self.k = k
        self._strides = list(strides)

    def strides(self) -> List[int]:
        return list(self._strides)

    def layers(self, stride: int) -> List[int]:
        return [self._strides.index(stride)]

    def kernel(self, layer: int) -> int:
        return self.k

    def masks(self, image: ImageGrid, stride: int) -> Dict[int, np.ndarray]:
        intensity = image.array().mean(axis=0)
        height, width = intensity.shape
        if height % stride or width % stride:
            raise HarnessError(f"image {height}x{width} is not divisible by stride {stride}")
        pooled = intensity.reshape(height // stride, stride, width // stride, stride).mean(axis=(1, 3))
        with no_grad():
            patches = ops.unfold(Tensor(pooled[None, None]), self.k).numpy()[0]
        patches = patches + INTENSITY_EPS
        return {self.layers(stride)[0]: patches / patches.sum(axis=1, keepdims=True)}


class LocationSampler(Sampler):
    """Static continuous sampling locations, deformable-convolution style.

    Each location (dx, dy), in feature cells relative to the center, carries
    an equal share of mass splatted bilinearly over its 4 neighbor cells.
    """

    name = 'location'

    def __init__(self, offsets: Optional[np.ndarray] = None, strides: Sequence[int] = (1,)):
        if offsets is None:
            dy, dx = np.meshgrid([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], indexing='ij')
            offsets = np.stack([dx.ravel(), dy.ravel()], axis=1)
        self.offsets = np.asarray(offsets, dtype=np.float64).reshape(-1, 2)
        if len(self.offsets) == 0 or not np.all(np.isfinite(self.offsets)):
            raise HarnessError("location sampler needs at least one finite offset")
        self._strides = list(strides)

    def strides(self) -> List[int]:
        return list(self._strides)

    def layers(self, stride: int) -> List[int]:
        return [self._strides.index(stride)]

    def reach(self, layer: int) -> int:
        return int(np.ceil(np.abs(self.offsets).max()))

    def graph_at(self, stride: int, center: Cell) -> SamplingGraph:
        cols = center[1] + self.offsets[:, 0]
        rows = center[0] + self.offsets[:, 1]
        col0, row0 = np.floor(cols), np.floor(rows)
        fx, fy = cols - col0, rows - row0
        share = 1.0 / len(self.offsets)
        points, masses = [], []
        for dy, dx, weight in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                               (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
            keep = weight > 0
            points.append(np.stack([stride * (col0[keep] + dx + 0.5),
                                    stride * (row0[keep] + dy + 0.5)], axis=1))
            masses.append(share * weight[keep])
        return SamplingGraph.from_masses(np.concatenate(points), np.concatenate(masses))

    def graphs(self, image: ImageGrid, stride: int, center: Cell) -> Dict[int, List[SamplingGraph]]:
        self.check_center(stride, center, image.height, image.width)
        return {self.layers(stride)[0]: [self.graph_at(stride, center)]}
