from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from utils.errors import EMDError


# weights below this are dropped before solving
PRUNE_BELOW = 1e-12
NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class SamplingGraph:
    """Discrete distribution over 2-D support points in input-pixel (x, y) coordinates.

    Construction validates the weights, merges duplicate points and prunes
    negligible weights, so every instance is a clean probability measure.
    """
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(points) != len(weights):
            raise EMDError(f"{len(points)} points but {len(weights)} weights")
        if len(points) == 0:
            raise EMDError("sampling graph needs at least one point")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
            raise EMDError("sampling graph contains non-finite values")
        if np.any(weights < 0):
            raise EMDError(f"negative weight {weights.min()}")
        total = weights.sum()
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise EMDError(f"weights sum to {total!r}, expected 1")

        unique, inverse = np.unique(points, axis=0, return_inverse=True)
        merged = np.bincount(inverse.reshape(-1), weights=weights, minlength=len(unique))
        keep = merged >= PRUNE_BELOW
        object.__setattr__(self, 'points', unique[keep])
        object.__setattr__(self, 'weights', merged[keep] / merged[keep].sum())

    @classmethod
    def from_masses(cls, points: Sequence[Tuple[float, float]], masses: Sequence[float]) -> 'SamplingGraph':
        """Build from unnormalized non-negative masses"""
        masses = np.asarray(masses, dtype=np.float64)
        if np.any(masses < 0) or masses.sum() <= 0:
            raise EMDError("masses must be non-negative with a positive total")
        return cls(points, masses / masses.sum())

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def centroid(self) -> np.ndarray:
        return self.weights @ self.points

    def translated(self, offset: Sequence[float]) -> 'SamplingGraph':
        return SamplingGraph(self.points + np.asarray(offset, dtype=np.float64), self.weights)

    def __repr__(self) -> str:
        return f"SamplingGraph(points={len(self)}, centroid={self.centroid.round(3).tolist()})"
