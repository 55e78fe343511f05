# dataset.py

"""Synthetic shapes dataset: grayscale PGM images plus a CSV manifest."""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from utils import ConfigError, DatasetError
from utils import read_pgm, to_uint8, to_unit_range, write_pgm
from utils import setup_logger


logger = setup_logger('dataset')

SHAPE_CLASSES = ('square', 'disk', 'triangle', 'cross')
MANIFEST_FILE = 'manifest.csv'
MIN_SIDE = 32

# circumradius of a shape = scale * side * RADIUS_FRACTION
RADIUS_FRACTION = 0.3
SCALE_RANGE = (0.5, 1.0)
JITTER_FRACTION = 0.1
CROSS_ARM = 0.95
CROSS_HALF_WIDTH = 0.25
SUPERSAMPLE = 4


@dataclass(frozen=True)
class ShapeParams:
    shape: str
    angle: float
    scale: float
    center: Tuple[float, float]

    def radius(self, side: int) -> float:
        return self.scale * side * RADIUS_FRACTION


def _inside(shape: str, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Membership in the unit-circumradius shape, in its own frame"""
    if shape == 'disk':
        return u * u + v * v <= 1.0
    if shape == 'square':
        half = 1.0 / np.sqrt(2.0)
        return (np.abs(u) <= half) & (np.abs(v) <= half)
    if shape == 'triangle':
        # equilateral, vertices on the unit circle; edges at distance 1/2
        inside = np.ones_like(u, dtype=bool)
        for normal_angle in (np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3):
            inside &= -(u * np.cos(normal_angle) + v * np.sin(normal_angle)) <= 0.5
        return inside
    if shape == 'cross':
        horizontal = (np.abs(u) <= CROSS_ARM) & (np.abs(v) <= CROSS_HALF_WIDTH)
        vertical = (np.abs(v) <= CROSS_ARM) & (np.abs(u) <= CROSS_HALF_WIDTH)
        return horizontal | vertical
    raise DatasetError(f"unknown shape '{shape}', expected one of {SHAPE_CLASSES}")


def render_shape(params: ShapeParams, side: int) -> np.ndarray:
    """Anti-aliased [side, side] coverage image in [0, 1]"""
    samples = (np.arange(side * SUPERSAMPLE) + 0.5) / SUPERSAMPLE
    y, x = np.meshgrid(samples, samples, indexing='ij')
    theta = np.radians(params.angle)
    dx, dy = x - params.center[0], y - params.center[1]
    radius = params.radius(side)
    u = (np.cos(theta) * dx + np.sin(theta) * dy) / radius
    v = (-np.sin(theta) * dx + np.cos(theta) * dy) / radius
    coverage = _inside(params.shape, u, v).astype(np.float64)
    return coverage.reshape(side, SUPERSAMPLE, side, SUPERSAMPLE).mean(axis=(1, 3))


def random_shape(shape: str, side: int, rng: np.random.Generator) -> ShapeParams:
    jitter = rng.uniform(-JITTER_FRACTION, JITTER_FRACTION, size=2) * side
    return ShapeParams(shape=shape, angle=float(rng.uniform(0.0, 360.0)),
                       scale=float(rng.uniform(*SCALE_RANGE)),
                       center=(side / 2.0 + float(jitter[0]), side / 2.0 + float(jitter[1])))


def gen_dataset(out_dir: Union[str, Path], n_per_class: int, side: int = 64, seed: int = 0,
                val_fraction: float = 0.2) -> pd.DataFrame:
    """Write n_per_class images of every shape class and the manifest.

    Returns the manifest (path relative to out_dir, label, split).
    """
    if side < MIN_SIDE:
        raise ConfigError(f"side must be >= {MIN_SIDE}, got {side}")
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be >= 1, got {n_per_class}")
    if not 0.0 <= val_fraction < 1.0:
        raise ConfigError(f"val_fraction must be in [0, 1), got {val_fraction}")

    out_dir = Path(out_dir)
    image_dir = out_dir / 'images'
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError(f"cannot create {image_dir}: {e}") from e

    rng = np.random.default_rng(seed)
    rows = []
    for label, shape in enumerate(SHAPE_CLASSES):
        for index in range(n_per_class):
            params = random_shape(shape, side, rng)
            relative = f"images/{shape}_{index:05d}.pgm"
            write_pgm(out_dir / relative, to_uint8(render_shape(params, side)))
            rows.append({'path': relative, 'label': label})

    manifest = pd.DataFrame(rows, columns=['path', 'label'])
    n_val = int(round(len(manifest) * val_fraction))
    order = rng.permutation(len(manifest))
    manifest['split'] = 'train'
    manifest.loc[order[:n_val], 'split'] = 'val'

    try:
        manifest.to_csv(out_dir / MANIFEST_FILE, index=False)
    except OSError as e:
        raise DatasetError(f"cannot write manifest in {out_dir}: {e}") from e
    logger.info(f"Generated {len(manifest)} images ({n_val} val) of side {side} in {out_dir}")
    return manifest


def read_manifest(data_dir: Union[str, Path]) -> pd.DataFrame:
    path = Path(data_dir) / MANIFEST_FILE
    try:
        manifest = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f"cannot read dataset manifest {path}: {e}") from e
    missing = {'path', 'label', 'split'} - set(manifest.columns)
    if missing:
        raise DatasetError(f"{path} lacks columns {sorted(missing)}")
    return manifest


def load_split(data_dir: Union[str, Path], split: str) -> Tuple[np.ndarray, np.ndarray]:
    """(images [N, 1, H, W] in [0, 1], labels [N]) of one split, in manifest order"""
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)
    selected = manifest[manifest['split'] == split]
    if selected.empty:
        raise DatasetError(f"split '{split}' of {data_dir} is empty")
    images = np.stack([to_unit_range(read_pgm(data_dir / path))[None] for path in selected['path']])
    labels = selected['label'].to_numpy(dtype=np.int64)
    logger.debug(f"Loaded {len(labels)} '{split}' images from {data_dir}")
    return images, labels
