from .affine import (
    Affine2D,
    TRANSFORM_KINDS,
    compose,
    apply_point,
    image_center,
    make_transform,
    analytic_inverse,
    random_params,
)
from .warp import ImageGrid, warp_image

__all__ = [
    'Affine2D',
    'TRANSFORM_KINDS',
    'compose',
    'apply_point',
    'image_center',
    'make_transform',
    'analytic_inverse',
    'random_params',
    'ImageGrid',
    'warp_image',
]
