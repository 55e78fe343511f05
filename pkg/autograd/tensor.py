"""Dense float64 tensors with a creation-ordered tape for reverse-mode AD."""

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np

from config import settings
from utils.errors import AutogradError, NonFiniteError, ShapeError


_node_counter = itertools.count()
# per-thread recording switch
_grad_mode = threading.local()

# backward rule: gradient of the output -> one gradient (or None) per input
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(eq=False)
class TapeNode:
    """One recorded op. ``index`` orders the tape by creation time."""
    op: str
    inputs: Tuple['Tensor', ...]
    backward_fn: BackwardFn
    index: int = field(default_factory=lambda: next(_node_counter))

    def __repr__(self) -> str:
        return f"TapeNode(op={self.op}, index={self.index}, inputs={len(self.inputs)})"


class Tensor:
    """Row-major float64 array with optional gradient tracking."""

    def __init__(self, data, requires_grad: bool = False, _node: Optional[TapeNode] = None,
                 _copy: bool = True):
        # 0-d inputs stay 0-d; op outputs (_copy=False) are owned and not copied again
        array = np.array(data, dtype=np.float64, order='C', copy=True if _copy else None)
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError(f"tensor extents must be positive, got {array.shape}")
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional['Tensor'] = None
        self._node = _node

    # --- metadata -------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # --- operator sugar (rules live in autograd.ops) --------------------

    def __add__(self, other):
        return ops.add(self, as_tensor(other))

    def __radd__(self, other):
        return ops.add(self, as_tensor(other))

    def __sub__(self, other):
        return ops.sub(self, as_tensor(other))

    def __rsub__(self, other):
        return ops.add(ops.neg(self), as_tensor(other))

    def __mul__(self, other):
        return ops.mul(self, as_tensor(other))

    def __rmul__(self, other):
        return ops.mul(self, as_tensor(other))

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise AutogradError("division is only supported by a python scalar")
        return ops.mul(self, as_tensor(1.0 / float(other)))

    def __neg__(self):
        return ops.neg(self)

    def __matmul__(self, other):
        return ops.matmul(self, other)

    def reshape(self, *shape) -> 'Tensor':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes) -> 'Tensor':
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axes=None, keepdims: bool = False) -> 'Tensor':
        return ops.sum(self, axes, keepdims)

    def mean(self, axes=None, keepdims: bool = False) -> 'Tensor':
        return ops.mean(self, axes, keepdims)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def is_grad_enabled() -> bool:
    return getattr(_grad_mode, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording (evaluation, optimizer updates)."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


@contextmanager
def enable_grad() -> Iterator[None]:
    """Re-enable recording inside a no_grad region (recomputation during backward)."""
    previous = is_grad_enabled()
    _grad_mode.enabled = True
    try:
        yield
    finally:
        _grad_mode.enabled = previous


def record(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap an op result, checking finiteness and appending to the tape."""
    if settings.CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values in output of '{op}'")
    needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    if not needs_grad:
        return Tensor(data, _copy=False)
    node = TapeNode(op=op, inputs=tuple(inputs), backward_fn=backward_fn)
    return Tensor(data, requires_grad=True, _node=node, _copy=False)


def _accumulate(leaf: Tensor, grad: np.ndarray) -> None:
    if leaf.grad is None:
        leaf.grad = Tensor(grad)
    else:
        leaf.grad.data += grad


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every requires_grad leaf reachable from ``loss``.

    Gradients accumulate across calls until the leaves are zeroed.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    seed = np.ones_like(loss.data)
    if loss.is_leaf:
        if not loss.requires_grad:
            raise AutogradError("loss does not depend on any tensor that requires grad")
        _accumulate(loss, seed)
        return

    nodes = {}
    stack = [loss]
    while stack:
        tensor = stack.pop()
        node = tensor._node
        if node is None or node.index in nodes:
            continue
        nodes[node.index] = node
        stack.extend(node.inputs)

    pending = {loss._node.index: seed}
    for index in sorted(nodes, reverse=True):
        node = nodes[index]
        out_grad = pending.pop(index, None)
        if out_grad is None:
            continue
        input_grads = node.backward_fn(out_grad)
        for tensor, grad in zip(node.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if tensor._node is None:
                _accumulate(tensor, grad)
            elif tensor._node.index in pending:
                pending[tensor._node.index] = pending[tensor._node.index] + grad
            else:
                pending[tensor._node.index] = grad


from autograd import ops  # noqa: E402  (ops needs Tensor defined first)
