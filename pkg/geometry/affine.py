"""2-D affine maps over continuous pixel coordinates.

Pixel (row i, column j) sits at (x, y) = (j + 0.5, i + 0.5); an image of
height H and width W has its center at (W / 2, H / 2).
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from utils.errors import GeometryError


TRANSFORM_KINDS = ('rotation', 'reflection', 'skew', 'scale', 'identity')

ROTATION_RANGE = (-180.0, 180.0)
SHEAR_RANGE = (-0.3, 0.3)
SCALE_RANGE = (0.5, 2.0)
REFLECTION_AXES = ('horizontal', 'vertical')
SHEAR_DIRECTIONS = ('x', 'y')

MIN_ABS_DET = 1e-9

Point = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class Affine2D:
    """2x3 matrix m mapping (x, y, 1) to (x', y')"""
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (2, 3) or not np.all(np.isfinite(m)):
            raise GeometryError(f"affine matrix must be a finite 2x3 array, got shape {m.shape}")
        object.__setattr__(self, 'm', m)

    @classmethod
    def identity(cls) -> 'Affine2D':
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    @classmethod
    def from_linear(cls, linear: np.ndarray, center: Point = (0.0, 0.0)) -> 'Affine2D':
        """Apply ``linear`` about ``center``: p -> A (p - c) + c"""
        linear = np.asarray(linear, dtype=np.float64)
        c = np.asarray(center, dtype=np.float64)
        return cls(np.column_stack([linear, c - linear @ c]))

    @property
    def linear(self) -> np.ndarray:
        return self.m[:, :2]

    @property
    def translation(self) -> np.ndarray:
        return self.m[:, 2]

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.linear))

    def homogeneous(self) -> np.ndarray:
        return np.vstack([self.m, [0.0, 0.0, 1.0]])

    def compose(self, first: 'Affine2D') -> 'Affine2D':
        """self after first: p -> self(first(p))"""
        return Affine2D((self.homogeneous() @ first.homogeneous())[:2])

    def inverse(self) -> 'Affine2D':
        if abs(self.det) <= MIN_ABS_DET:
            raise GeometryError(f"transform is singular (det={self.det:.3e})")
        inv_linear = np.linalg.inv(self.linear)
        return Affine2D(np.column_stack([inv_linear, -inv_linear @ self.translation]))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an (n, 2) array of (x, y) points"""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.linear.T + self.translation

    def __repr__(self) -> str:
        return f"Affine2D({self.m.round(6).tolist()})"


def compose(second: Affine2D, first: Affine2D) -> Affine2D:
    return second.compose(first)


def apply_point(t: Affine2D, p: Sequence[float]) -> Point:
    x, y = p
    out = t.m @ np.array([x, y, 1.0])
    return float(out[0]), float(out[1])


def image_center(height: int, width: int) -> Point:
    return width / 2.0, height / 2.0


def _check_range(name: str, value: float, bounds: Tuple[float, float]) -> None:
    low, high = bounds
    if not low <= value <= high:
        raise GeometryError(f"{name}={value} outside [{low}, {high}]")


def make_transform(kind: str, params: Optional[Dict[str, Any]] = None,
                   center: Point = (0.0, 0.0)) -> Affine2D:
    """Centered transform of one of the evaluation kinds.

    params: rotation {'angle': degrees}, reflection {'axis': 'horizontal'|'vertical'},
    skew {'shear': s, 'direction': 'x'|'y'}, scale {'factor': sigma}.
    """
    params = params or {}
    if kind == 'identity':
        return Affine2D.identity()
    if kind == 'rotation':
        angle = float(params.get('angle', 0.0))
        _check_range('angle', angle, ROTATION_RANGE)
        theta = math.radians(angle)
        linear = [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    elif kind == 'reflection':
        axis = params.get('axis', 'vertical')
        if axis not in REFLECTION_AXES:
            raise GeometryError(f"reflection axis must be one of {REFLECTION_AXES}, got '{axis}'")
        # vertical axis flips x, horizontal axis flips y
        linear = [[-1.0, 0.0], [0.0, 1.0]] if axis == 'vertical' else [[1.0, 0.0], [0.0, -1.0]]
    elif kind == 'skew':
        shear = float(params.get('shear', 0.0))
        _check_range('shear', shear, SHEAR_RANGE)
        direction = params.get('direction', 'x')
        if direction not in SHEAR_DIRECTIONS:
            raise GeometryError(f"skew direction must be one of {SHEAR_DIRECTIONS}, got '{direction}'")
        linear = [[1.0, shear], [0.0, 1.0]] if direction == 'x' else [[1.0, 0.0], [shear, 1.0]]
    elif kind == 'scale':
        factor = float(params.get('factor', 1.0))
        _check_range('factor', factor, SCALE_RANGE)
        linear = [[factor, 0.0], [0.0, factor]]
    else:
        raise GeometryError(f"unknown transform kind '{kind}', expected one of {TRANSFORM_KINDS}")
    return Affine2D.from_linear(np.array(linear), center)


def analytic_inverse(kind: str, params: Optional[Dict[str, Any]] = None,
                     center: Point = (0.0, 0.0)) -> Affine2D:
    """Inverse built from inverted parameters rather than a matrix inverse"""
    params = dict(params or {})
    if kind == 'rotation':
        params['angle'] = -float(params.get('angle', 0.0))
    elif kind == 'skew':
        params['shear'] = -float(params.get('shear', 0.0))
    elif kind == 'scale':
        factor = 1.0 / float(params.get('factor', 1.0))
        return Affine2D.from_linear(np.diag([factor, factor]), center)
    return make_transform(kind, params, center)


def random_params(kind: str, rng: np.random.Generator) -> Dict[str, Any]:
    if kind == 'identity':
        return {}
    if kind == 'rotation':
        return {'angle': float(rng.uniform(*ROTATION_RANGE))}
    if kind == 'reflection':
        return {'axis': REFLECTION_AXES[int(rng.integers(len(REFLECTION_AXES)))]}
    if kind == 'skew':
        return {'shear': float(rng.uniform(*SHEAR_RANGE)),
                'direction': SHEAR_DIRECTIONS[int(rng.integers(len(SHEAR_DIRECTIONS)))]}
    if kind == 'scale':
        return {'factor': float(rng.uniform(*SCALE_RANGE))}
    raise GeometryError(f"unknown transform kind '{kind}', expected one of {TRANSFORM_KINDS}")
