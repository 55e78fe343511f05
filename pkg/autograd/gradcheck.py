"""Central finite-difference gradient checker."""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from autograd.tensor import Tensor, backward, no_grad
from utils.errors import AutogradError


SCALE_FLOOR = 1e-3
ABSOLUTE_FLOOR = 1e-8


@dataclass
class GradCheckResult:
    name: str
    checked: int
    relative_error: float
    worst_index: int


def relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor) per coordinate.

    The floor is the larger of ABSOLUTE_FLOOR and SCALE_FLOOR times the largest
    gradient magnitude among the checked coordinates.
    """
    magnitude = np.maximum(np.abs(analytic), np.abs(numeric))
    floor = max(ABSOLUTE_FLOOR, SCALE_FLOOR * float(magnitude.max()))
    return np.abs(analytic - numeric) / np.maximum(magnitude, floor)


def check_gradients(loss_fn: Callable[[], Tensor],
                    tensors: Dict[str, Tensor],
                    h: float = 1e-6,
                    max_coords: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None) -> Sequence[GradCheckResult]:
    """Compare backward() against central differences of ``loss_fn``.

    ``loss_fn`` must rebuild the scalar loss from the current contents of
    ``tensors``; entries are perturbed in place and restored. When
    ``max_coords`` is set, larger tensors are checked on a random subset.
    """
    for tensor in tensors.values():
        if not tensor.requires_grad:
            raise AutogradError("gradient check needs tensors with requires_grad=True")
        tensor.zero_grad()
    backward(loss_fn())

    rng = rng or np.random.default_rng(0)
    results = []
    for name, tensor in tensors.items():
        analytic_full = np.zeros(tensor.shape) if tensor.grad is None else tensor.grad.data
        flat = tensor.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(coords.size)
        with no_grad():
            for slot, index in enumerate(coords):
                original = flat[index]
                flat[index] = original + h
                plus = loss_fn().item()
                flat[index] = original - h
                minus = loss_fn().item()
                flat[index] = original
                numeric[slot] = (plus - minus) / (2.0 * h)
        errors = relative_errors(analytic_full.reshape(-1)[coords], numeric)
        worst = int(errors.argmax())
        results.append(GradCheckResult(name, int(coords.size), float(errors[worst]), int(coords[worst])))
    return results
