from typing import Dict, Iterator, List, Tuple

import numpy as np

from autograd import Tensor


class Module:
    """Container of named parameters, buffers and child modules.

    Attribute assignment order defines the network order used by
    checkpoints: Tensors with requires_grad are parameters, numpy arrays
    registered through ``register_buffer`` are buffers.
    """

    def __init__(self):
        self.training = True
        self._buffers: Dict[str, np.ndarray] = {}

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value

    def children(self) -> Iterator[Tuple[str, 'Module']]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{index}", item

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = '') -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in self._buffers.items():
            yield prefix + name, value
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True) -> 'Module':
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)


class Sequential(Module):
    def __init__(self, *stages: Module):
        super().__init__()
        self.stages = list(stages)

    def forward(self, x):
        for stage in self.stages:
            x = stage(x)
        return x

    def __iter__(self):
        return iter(self.stages)

    def __len__(self) -> int:
        return len(self.stages)
