"""Differentiable ops. Every op computes its forward with numpy and records a
backward rule on the tape through ``autograd.tensor.record``."""

from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from autograd.tensor import Tensor, as_tensor, record
from utils.errors import AutogradError, ShapeError


Axes = Union[int, Sequence[int], None]


def _normalize_axes(axes: Axes, ndim: int) -> Optional[Tuple[int, ...]]:
    if axes is None:
        return None
    if isinstance(axes, int):
        axes = (axes,)
    normalized = []
    for axis in axes:
        if not -ndim <= axis < ndim:
            raise ShapeError(f"axis {axis} out of range for rank {ndim}")
        normalized.append(axis % ndim)
    if len(set(normalized)) != len(normalized):
        raise ShapeError(f"repeated axis in {tuple(axes)}")
    return tuple(sorted(normalized))


# --- elementwise ---------------------------------------------------------

def _check_broadcast(a: Tensor, b: Tensor, kind: str) -> None:
    if b.shape == a.shape:
        return
    if b.ndim <= a.ndim and a.shape[a.ndim - b.ndim:] == b.shape:
        return
    raise ShapeError(f"{kind}: shape {b.shape} does not broadcast onto {a.shape}")


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.reshape((-1,) + shape).sum(axis=0))


def elementwise(a: Tensor, b: Tensor, kind: str) -> Tensor:
    """add / sub / mul; ``b`` may drop leading dimensions of ``a``."""
    _check_broadcast(a, b, kind)
    if kind == 'add':
        return record('add', a.data + b.data, (a, b),
                      lambda g: (g, _reduce_to(g, b.shape)))
    if kind == 'sub':
        return record('sub', a.data - b.data, (a, b),
                      lambda g: (g, _reduce_to(-g, b.shape)))
    if kind == 'mul':
        return record('mul', a.data * b.data, (a, b),
                      lambda g: (g * b.data, _reduce_to(g * a.data, b.shape)))
    raise AutogradError(f"unknown elementwise kind '{kind}'")


def add(a: Tensor, b: Tensor) -> Tensor:
    return elementwise(a, b, 'add')


def sub(a: Tensor, b: Tensor) -> Tensor:
    return elementwise(a, b, 'sub')


def mul(a: Tensor, b: Tensor) -> Tensor:
    return elementwise(a, b, 'mul')


def neg(a: Tensor) -> Tensor:
    return record('neg', -a.data, (a,), lambda g: (-g,))


# --- linear algebra and shape ---------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return record('matmul', a.data @ b.data, (a, b),
                  lambda g: (g @ b.data.T, a.data.T @ g))


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor], axis: int) -> Tensor:
    """Contract ``axis`` of ``x`` with weight [out, in] and add bias [out] along it."""
    axis %= x.ndim
    if weight.ndim != 2 or x.shape[axis] != weight.shape[1]:
        raise ShapeError(f"linear weight {weight.shape} does not match axis {axis} of {x.shape}")
    others = tuple(a for a in range(x.ndim) if a != axis)
    out = np.moveaxis(np.tensordot(x.data, weight.data, axes=([axis], [1])), -1, axis)
    view = [1] * x.ndim
    view[axis] = -1
    if bias is not None:
        out = out + bias.data.reshape(view)
    out = np.ascontiguousarray(out)

    def backward(g):
        grad_x = np.moveaxis(np.tensordot(g, weight.data, axes=([axis], [0])), -1, axis)
        grad_w = np.tensordot(g, x.data, axes=(others, others))
        grads = (grad_x, grad_w)
        return grads + ((g.sum(axis=others),) if bias is not None else ())

    inputs = (x, weight) + ((bias,) if bias is not None else ())
    return record('linear', out, inputs, backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"cannot reshape {x.shape} to {tuple(shape)}: {e}") from e
    return record('reshape', data, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(a % x.ndim for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose axes {axes} are not a permutation of rank {x.ndim}")
    inverse = tuple(np.argsort(axes))
    return record('transpose', x.data.transpose(axes), (x,),
                  lambda g: (g.transpose(inverse),))


def move_axis(x: Tensor, source: int, destination: int) -> Tensor:
    order = list(range(x.ndim))
    order.insert(destination % x.ndim, order.pop(source % x.ndim))
    return transpose(x, order)


def repeat(x: Tensor, repeats: int, axis: int) -> Tensor:
    """np.repeat along one axis: element i becomes copies i*repeats .. i*repeats+repeats-1."""
    axis = axis % x.ndim
    split = x.shape[:axis] + (x.shape[axis], repeats) + x.shape[axis + 1:]
    return record('repeat', np.repeat(x.data, repeats, axis=axis), (x,),
                  lambda g: (g.reshape(split).sum(axis=axis + 1),))


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    axis = axis % tensors[0].ndim
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from e
    offsets = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return record('concat', data, tuple(tensors),
                  lambda g: tuple(np.split(g, offsets, axis=axis)))


# --- reductions -------------------------------------------------------------

def sum(x: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    norm = _normalize_axes(axes, x.ndim)
    data = np.asarray(x.data.sum(axis=norm, keepdims=keepdims))

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, norm if norm is not None else tuple(range(x.ndim)))
        return (np.broadcast_to(g, x.shape).copy(),)

    return record('sum', data, (x,), backward)


def mean(x: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    norm = _normalize_axes(axes, x.ndim)
    count = x.size if norm is None else int(np.prod([x.shape[a] for a in norm]))
    return mul(sum(x, norm, keepdims), as_tensor(1.0 / count))


# --- activations -------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    return record('relu', np.where(active, x.data, 0.0), (x,), lambda g: (g * active,))


def softmax(x: Tensor, axes: Iterable[int]) -> Tensor:
    """Max-stabilized softmax normalizing jointly over ``axes``."""
    axes = tuple(axes)
    if not axes:
        raise ShapeError("softmax needs at least one axis")
    norm = _normalize_axes(axes, x.ndim)
    shifted = x.data - x.data.max(axis=norm, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=norm, keepdims=True)

    def backward(g):
        return (probs * (g - (g * probs).sum(axis=norm, keepdims=True)),)

    return record('softmax', probs, (x,), backward)


# --- spatial ------------------------------------------------------------------

def unfold(x: Tensor, k: int, pad: Optional[int] = None) -> Tensor:
    """[..., H, W] -> [..., k*k, H, W]; footprint index j = dy*k + dx, zero padded."""
    if k < 1 or k % 2 == 0:
        raise ShapeError(f"unfold kernel size must be odd and positive, got {k}")
    half = (k - 1) // 2
    if pad is None:
        pad = half
    if pad != half:
        raise ShapeError(f"unfold pad must be (k-1)/2 = {half} for same-size output, got {pad}")
    if x.ndim < 2:
        raise ShapeError(f"unfold needs spatial axes, got shape {x.shape}")
    lead, (height, width) = x.shape[:-2], x.shape[-2:]
    pad_width = [(0, 0)] * len(lead) + [(pad, pad), (pad, pad)]
    padded = np.pad(x.data, pad_width)
    out = np.empty(lead + (k * k, height, width))
    for dy in range(k):
        for dx in range(k):
            out[..., dy * k + dx, :, :] = padded[..., dy:dy + height, dx:dx + width]

    def backward(g):
        grad_padded = np.zeros(padded.shape)
        for dy in range(k):
            for dx in range(k):
                grad_padded[..., dy:dy + height, dx:dx + width] += g[..., dy * k + dx, :, :]
        return (grad_padded[..., pad:pad + height, pad:pad + width],)

    return record('unfold', out, (x,), backward)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pool over the trailing two axes, ceil mode.

    Ties go to the first maximal element in row-major window order.
    """
    if x.ndim < 2:
        raise ShapeError(f"maxpool2 needs spatial axes, got shape {x.shape}")
    lead, (height, width) = x.shape[:-2], x.shape[-2:]
    out_h, out_w = -(-height // 2), -(-width // 2)
    padded = np.full(lead + (2 * out_h, 2 * out_w), -np.inf)
    padded[..., :height, :width] = x.data
    windows = np.moveaxis(padded.reshape(lead + (out_h, 2, out_w, 2)), -3, -2)
    windows = windows.reshape(lead + (out_h, out_w, 4))
    winner = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, winner, axis=-1)[..., 0]

    def backward(g):
        grad_windows = np.zeros(lead + (out_h, out_w, 4))
        np.put_along_axis(grad_windows, winner, g[..., None], axis=-1)
        grad = np.moveaxis(grad_windows.reshape(lead + (out_h, out_w, 2, 2)), -2, -3)
        return (grad.reshape(lead + (2 * out_h, 2 * out_w))[..., :height, :width],)

    return record('maxpool2', out, (x,), backward)


# --- normalization and loss ----------------------------------------------------

def _channel_view(ndim: int) -> Tuple[int, ...]:
    return (1, -1) + (1,) * (ndim - 2)


def _stat_axes(ndim: int) -> Tuple[int, ...]:
    return (0,) + tuple(range(2, ndim))


def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor, eps: float):
    """Normalize [N, C, ...] with batch statistics over every axis but 1.

    Returns (output, batch_mean, batch_var); variance is biased and clamped at 0.
    """
    if x.ndim < 2 or x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batch norm expects [N, {gamma.shape[0]}, ...], got {x.shape}")
    axes = _stat_axes(x.ndim)
    view = _channel_view(x.ndim)
    batch_mean = x.data.mean(axis=axes)
    batch_var = np.maximum(x.data.var(axis=axes), 0.0)
    inv_std = 1.0 / np.sqrt(batch_var + eps)
    x_hat = (x.data - batch_mean.reshape(view)) * inv_std.reshape(view)
    out = gamma.data.reshape(view) * x_hat + beta.data.reshape(view)
    count = x.size / x.shape[1]

    def backward(g):
        grad_gamma = (g * x_hat).sum(axis=axes)
        grad_beta = g.sum(axis=axes)
        g_hat = g * gamma.data.reshape(view)
        grad_x = inv_std.reshape(view) / count * (
            count * g_hat
            - g_hat.sum(axis=axes, keepdims=True)
            - x_hat * (g_hat * x_hat).sum(axis=axes, keepdims=True)
        )
        return grad_x, grad_gamma, grad_beta

    return record('batch_norm_train', out, (x, gamma, beta), backward), batch_mean, batch_var


def batch_norm_eval(x: Tensor, gamma: Tensor, beta: Tensor,
                    running_mean: np.ndarray, running_var: np.ndarray, eps: float) -> Tensor:
    if x.ndim < 2 or x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batch norm expects [N, {gamma.shape[0]}, ...], got {x.shape}")
    axes = _stat_axes(x.ndim)
    view = _channel_view(x.ndim)
    inv_std = 1.0 / np.sqrt(running_var + eps)
    x_hat = (x.data - running_mean.reshape(view)) * inv_std.reshape(view)
    out = gamma.data.reshape(view) * x_hat + beta.data.reshape(view)

    def backward(g):
        return (g * gamma.data.reshape(view) * inv_std.reshape(view),
                (g * x_hat).sum(axis=axes), g.sum(axis=axes))

    return record('batch_norm_eval', out, (x, gamma, beta), backward)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy expects logits [N, L] and N labels, "
                         f"got {logits.shape} and {labels.shape}")
    n, classes = logits.shape
    if labels.min() < 0 or labels.max() >= classes:
        raise ShapeError(f"labels must lie in [0, {classes}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = np.asarray(-log_probs[rows, labels].mean())

    def backward(g):
        grad = np.exp(log_probs)
        grad[rows, labels] -= 1.0
        return (g * grad / n,)

    return record('cross_entropy', loss, (logits,), backward)
