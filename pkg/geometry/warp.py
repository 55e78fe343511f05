from dataclasses import dataclass

import numpy as np

from autograd import Tensor
from geometry.affine import Affine2D, image_center
from utils.errors import GeometryError


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Image as a [C, H, W] tensor"""
    pixels: Tensor

    def __post_init__(self):
        if self.pixels.ndim != 3:
            raise GeometryError(f"image must be [C, H, W], got shape {self.pixels.shape}")

    @classmethod
    def from_array(cls, array: np.ndarray) -> 'ImageGrid':
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            array = array[None]
        return cls(Tensor(array))

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    @property
    def center(self):
        return image_center(self.height, self.width)

    def array(self) -> np.ndarray:
        return self.pixels.data


def warp_image(img: ImageGrid, t: Affine2D) -> ImageGrid:
    """Resample ``img`` under ``t`` by inverse mapping with bilinear interpolation.

    Output extents equal the input; source reads outside the image are 0.
    """
    inverse = t.inverse()
    height, width = img.height, img.width
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing='ij')
    targets = np.stack([cols.ravel() + 0.5, rows.ravel() + 0.5], axis=1)
    sources = inverse.apply(targets)

    # continuous index space: pixel centers at integers
    u = sources[:, 0] - 0.5
    v = sources[:, 1] - 0.5
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = u - x0
    fy = v - y0

    data = img.array()
    out = np.zeros((img.channels, height * width))
    for dy, dx, weight in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                           (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        ys, xs = y0 + dy, x0 + dx
        inside = (ys >= 0) & (ys < height) & (xs >= 0) & (xs < width) & (weight != 0)
        out[:, inside] += weight[inside] * data[:, ys[inside], xs[inside]]
    return ImageGrid(Tensor(out.reshape(img.channels, height, width)))
