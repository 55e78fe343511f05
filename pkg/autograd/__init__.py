from .tensor import Tensor, TapeNode, as_tensor, backward, no_grad, enable_grad, is_grad_enabled
from . import ops
from .serialization import save_tensor, load_tensor, tensor_to_bytes, tensor_from_bytes

__all__ = [
    'Tensor',
    'TapeNode',
    'as_tensor',
    'backward',
    'no_grad',
    'enable_grad',
    'is_grad_enabled',
    'ops',
    'save_tensor',
    'load_tensor',
    'tensor_to_bytes',
    'tensor_from_bytes',
]
