"""SEST binary tensor format.

Layout: magic b"SEST", u32 rank, rank x u64 extents, then float64 values,
all little-endian, row-major.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from autograd.tensor import Tensor
from utils.errors import CheckpointError


MAGIC = b"SEST"


def tensor_to_bytes(tensor: Tensor) -> bytes:
    header = MAGIC + struct.pack('<I', tensor.ndim)
    header += struct.pack(f'<{tensor.ndim}Q', *tensor.shape)
    return header + tensor.data.astype('<f8').tobytes(order='C')


def tensor_from_bytes(payload: bytes) -> Tensor:
    if payload[:4] != MAGIC:
        raise CheckpointError(f"bad magic {payload[:4]!r}, expected {MAGIC!r}")
    try:
        (rank,) = struct.unpack_from('<I', payload, 4)
        shape = struct.unpack_from(f'<{rank}Q', payload, 8)
    except struct.error as e:
        raise CheckpointError(f"truncated SEST header ({len(payload)} bytes): {e}") from e
    offset = 8 + 8 * rank
    count = int(np.prod(shape)) if rank else 1
    expected = offset + 8 * count
    if len(payload) != expected:
        raise CheckpointError(f"SEST payload is {len(payload)} bytes, header implies {expected}")
    values = np.frombuffer(payload, dtype='<f8', count=count, offset=offset)
    return Tensor(values.reshape(shape))


def save_tensor(tensor: Tensor, path: Union[str, Path]) -> None:
    Path(path).write_bytes(tensor_to_bytes(tensor))


def load_tensor(path: Union[str, Path]) -> Tensor:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read tensor file {path}: {e}") from e
    return tensor_from_bytes(payload)
