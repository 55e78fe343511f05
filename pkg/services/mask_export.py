# mask_export.py

from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from geometry import ImageGrid
from layers import SESNet, load_checkpoint
from services.samplers import NetworkSampler, footprint_offsets
from utils import HarnessError
from utils import read_pgm, to_unit_range, write_ppm
from utils import setup_logger


logger = setup_logger('mask_export')


def overlay_filename(layer: int, center: Tuple[int, int], channel: int) -> str:
    return f"mask_l{layer}_r{center[0]}_c{center[1]}_ch{channel}.ppm"


def render_overlay(gray: np.ndarray, mask: np.ndarray, k: int, stride: int,
                   center: Tuple[int, int]) -> np.ndarray:
    """Red heat overlay of one k*k mask on a [H, W] gray image in [0, 1].

    Each footprint cell covers stride x stride pixels; with a = w / max(w),
    R = g + (1 - g) * a and G = B = g * (1 - a). Returns uint8 [H, W, 3].
    """
    gray = np.asarray(gray, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64).reshape(-1)
    if mask.size != k * k:
        raise HarnessError(f"mask has {mask.size} cells, footprint k={k} needs {k * k}")
    height, width = gray.shape
    alpha = np.zeros_like(gray)
    peak = mask.max()
    for (dy, dx), weight in zip(footprint_offsets(k), mask):
        top = stride * (center[0] + dy)
        left = stride * (center[1] + dx)
        if top < 0 or left < 0 or top + stride > height or left + stride > width:
            raise HarnessError(f"footprint cell ({center[0] + dy}, {center[1] + dx}) leaves the image")
        alpha[top:top + stride, left:left + stride] = weight / peak if peak > 0 else 0.0

    red = gray + (1.0 - gray) * alpha
    green = gray * (1.0 - alpha)
    rgb = np.stack([red, green, green], axis=-1)
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)


def export_masks(model: Union[SESNet, str, Path], image_path: Union[str, Path], layer: int,
                 center: Tuple[int, int], out_dir: Union[str, Path]) -> List[Path]:
    """One PPM overlay per mask channel of ``layer`` at feature cell ``center``"""
    net = model if isinstance(model, SESNet) else load_checkpoint(model)
    if not 0 <= layer < len(net.blocks):
        raise HarnessError(f"layer {layer} outside [0, {len(net.blocks)})")
    gray = to_unit_range(read_pgm(image_path))
    image = ImageGrid.from_array(gray)
    stride = net.block_stride(layer)

    sampler = NetworkSampler(net)
    sampler.check_center(stride, center, image.height, image.width)
    masks = sampler.masks(image, stride)[layer]
    k = sampler.kernel(layer)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for channel, channel_masks in enumerate(masks):
        path = out_dir / overlay_filename(layer, center, channel)
        write_ppm(path, render_overlay(gray, channel_masks[:, center[0], center[1]], k, stride, center))
        written.append(path)
    logger.info(f"Wrote {len(written)} mask overlays for layer {layer} at {center} to {out_dir}")
    return written
