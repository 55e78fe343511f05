"""Binary portable anymap I/O: PGM (P5, grayscale) and PPM (P6, RGB)."""

import re
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from utils.errors import DatasetError


_TOKEN = re.compile(rb'(#[^\n]*\n?)|(\S+)')


def _parse_header(payload: bytes) -> Tuple[bytes, int, int, int, int]:
    """Returns (magic, width, height, maxval, offset of the raster)"""
    tokens = []
    position = 0
    while len(tokens) < 4:
        match = _TOKEN.search(payload, position)
        if match is None:
            raise DatasetError("truncated PNM header")
        position = match.end()
        if match.group(2) is not None:
            tokens.append(match.group(2))
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as e:
        raise DatasetError(f"malformed PNM header: {e}") from e
    # exactly one whitespace byte separates the header from the raster
    return magic, width, height, maxval, position + 1


def _read(path: Union[str, Path], expected_magic: bytes, channels: int) -> np.ndarray:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    magic, width, height, maxval, offset = _parse_header(payload)
    if magic != expected_magic:
        raise DatasetError(f"{path}: expected {expected_magic.decode()} image, found {magic!r}")
    if width <= 0 or height <= 0:
        raise DatasetError(f"{path}: empty {width}x{height} image")
    if not 0 < maxval < 65536:
        raise DatasetError(f"{path}: unsupported maxval {maxval}")
    dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
    count = width * height * channels
    available = max(len(payload) - offset, 0) // dtype.itemsize
    if available < count:
        raise DatasetError(f"{path}: raster holds {available} samples, expected {count}")
    raster = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
    shape = (height, width) if channels == 1 else (height, width, channels)
    return raster.reshape(shape).astype(np.uint16 if maxval >= 256 else np.uint8)


def _write(path: Union[str, Path], magic: bytes, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise DatasetError(f"PNM writer expects uint8 pixels, got {pixels.dtype}")
    height, width = pixels.shape[:2]
    header = magic + f"\n{width} {height}\n255\n".encode('ascii')
    try:
        Path(path).write_bytes(header + np.ascontiguousarray(pixels).tobytes())
    except OSError as e:
        raise DatasetError(f"cannot write {path}: {e}") from e


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """[H, W] unsigned pixels"""
    return _read(path, b'P5', 1)


def write_pgm(path: Union[str, Path], pixels: np.ndarray) -> None:
    if np.asarray(pixels).ndim != 2:
        raise DatasetError("PGM pixels must be [H, W]")
    _write(path, b'P5', pixels)


def read_ppm(path: Union[str, Path]) -> np.ndarray:
    """[H, W, 3] unsigned pixels"""
    return _read(path, b'P6', 3)


def write_ppm(path: Union[str, Path], pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise DatasetError("PPM pixels must be [H, W, 3]")
    _write(path, b'P6', pixels)


def to_unit_range(pixels: np.ndarray) -> np.ndarray:
    """uint8/uint16 raster -> float64 in [0, 1]"""
    scale = 65535.0 if pixels.dtype == np.uint16 else 255.0
    return pixels.astype(np.float64) / scale


def to_uint8(values: np.ndarray) -> np.ndarray:
    """float values in [0, 1] -> rounded uint8"""
    return np.clip(np.rint(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)
