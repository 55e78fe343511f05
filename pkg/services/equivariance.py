# equivariance.py

"""AEMD: how far observed sampling graphs drift from ideally transformed ones.

For each image a transform T, a stride d and a feature cell c are drawn. The
graphs sampled at c in the original image are pushed through T (the ideal
graphs) and compared by EMD with the graphs sampled in the warped image at
the feature cell nearest to T(c). The ideal graphs are shifted by the exact
sub-cell residual between that cell and T(c).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from geometry import Affine2D, ImageGrid, make_transform, random_params, warp_image
from models import AEMDRecord, AEMDReport, SamplingGraph
from services.emd_solver import emd
from services.samplers import Cell, Sampler
from utils import HarnessError
from utils import setup_logger


logger = setup_logger('equivariance')


@dataclass(frozen=True)
class SamplerProbe:
    """One probed layer of a sampler at a given stride"""
    sampler: Sampler
    stride: int
    layer: int

    def __post_init__(self):
        if self.stride < 1:
            raise HarnessError(f"stride must be >= 1, got {self.stride}")
        if self.stride not in self.sampler.strides():
            raise HarnessError(f"sampler '{self.sampler.name}' has no stride {self.stride}")
        if self.layer not in self.sampler.layers(self.stride):
            raise HarnessError(f"layer {self.layer} is not probed at stride {self.stride}")


@dataclass(frozen=True)
class ProbePlan:
    """Everything drawn for one image before any sampling happens"""
    image_index: int
    params: Dict[str, Any]
    transform: Affine2D
    stride: int
    center: Cell
    mapped_center: Cell
    # lifted mapped cell minus T(lifted center), in pixels
    offset: np.ndarray


def extract_graph(probe: SamplerProbe, img: ImageGrid, center: Cell, mask_channel: int) -> SamplingGraph:
    graphs = probe.sampler.graphs(img, probe.stride, center)[probe.layer]
    if not 0 <= mask_channel < len(graphs):
        raise HarnessError(f"mask channel {mask_channel} outside [0, {len(graphs)})")
    return graphs[mask_channel]


def ideal_graph(g: SamplingGraph, t: Affine2D) -> SamplingGraph:
    """Support mapped through t, weights unchanged; stays a point cloud"""
    return SamplingGraph(t.apply(g.points), g.weights)


def alpha_for(side: int) -> float:
    """Normalizer making the largest in-image EMD at most 1 (1/112 at 224 pixels)"""
    return 2.0 / side


def valid_centers(sampler: Sampler, stride: int, t: Affine2D,
                  height: int, width: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centers whose own and T-mapped footprints avoid padded cells.

    Returns (centers [n, 2] as (row, col), mapped cells [n, 2], offsets [n, 2] as (x, y)).
    """
    rows, cols = sampler.feature_shape(stride, height, width)
    reach = sampler.stride_reach(stride)
    grid_rows, grid_cols = np.meshgrid(np.arange(reach, rows - reach),
                                       np.arange(reach, cols - reach), indexing='ij')
    centers = np.stack([grid_rows.ravel(), grid_cols.ravel()], axis=1)
    if len(centers) == 0:
        empty = np.zeros((0, 2))
        return centers, empty.astype(np.int64), empty

    lifted = np.stack([stride * (centers[:, 1] + 0.5), stride * (centers[:, 0] + 0.5)], axis=1)
    mapped_points = t.apply(lifted)
    mapped = np.stack([np.rint(mapped_points[:, 1] / stride - 0.5),
                       np.rint(mapped_points[:, 0] / stride - 0.5)], axis=1).astype(np.int64)
    inside = ((mapped[:, 0] >= reach) & (mapped[:, 0] < rows - reach)
              & (mapped[:, 1] >= reach) & (mapped[:, 1] < cols - reach))
    mapped = mapped[inside]
    lifted_mapped = np.stack([stride * (mapped[:, 1] + 0.5), stride * (mapped[:, 0] + 0.5)], axis=1)
    return centers[inside], mapped, lifted_mapped - mapped_points[inside]


def draw_probe(sampler: Sampler, image: ImageGrid, image_index: int, transform_kind: str,
               rng: np.random.Generator, params: Optional[Dict[str, Any]] = None) -> ProbePlan:
    """Draw (T, stride, center), redrawing when no center survives T"""
    strides = sampler.strides()
    for attempt in range(settings.AEMD_MAX_RETRIES):
        drawn = dict(params) if params is not None else random_params(transform_kind, rng)
        t = make_transform(transform_kind, drawn, image.center)
        stride = strides[int(rng.integers(len(strides)))]
        centers, mapped, offsets = valid_centers(sampler, stride, t, image.height, image.width)
        if len(centers):
            pick = int(rng.integers(len(centers)))
            return ProbePlan(image_index=image_index, params=drawn, transform=t, stride=stride,
                             center=(int(centers[pick, 0]), int(centers[pick, 1])),
                             mapped_center=(int(mapped[pick, 0]), int(mapped[pick, 1])),
                             offset=offsets[pick])
        logger.debug(f"Image {image_index}: no valid center for {transform_kind} {drawn} "
                     f"at stride {stride} (attempt {attempt + 1})")
    raise HarnessError(f"no valid center for image {image_index} after "
                       f"{settings.AEMD_MAX_RETRIES} {transform_kind} draws")


def evaluate_probe(sampler: Sampler, image: ImageGrid, plan: ProbePlan) -> AEMDRecord:
    warped = warp_image(image, plan.transform)
    originals = sampler.graphs(image, plan.stride, plan.center)
    observed = sampler.graphs(warped, plan.stride, plan.mapped_center)
    layer_emds: Dict[int, List[float]] = {}
    for layer, graphs in originals.items():
        layer_emds[layer] = [
            emd(ideal_graph(g, plan.transform).translated(plan.offset), g_hat)
            for g, g_hat in zip(graphs, observed[layer])
        ]
    return AEMDRecord(image_index=plan.image_index, transform_params=plan.params, stride=plan.stride,
                      center=plan.center, mapped_center=plan.mapped_center, layer_emds=layer_emds)


def aemd(sampler: Sampler, images: Sequence[ImageGrid], transform_kind: str, n: int,
         rng: np.random.Generator, params: Optional[Dict[str, Any]] = None, seed: int = 0) -> AEMDReport:
    """Average EMD between ideal and observed sampling graphs over the first n images.

    All random draws happen up front in image order; sampling and EMD solves
    then run on up to settings.SES_THREADS workers.
    """
    if n < 1:
        raise HarnessError(f"n must be >= 1, got {n}")
    if n > len(images):
        raise HarnessError(f"requested {n} images but only {len(images)} are available")
    images = list(images[:n])
    sides = {max(img.height, img.width) for img in images}
    if len(sides) != 1:
        raise HarnessError(f"images must share one size, got sides {sorted(sides)}")
    side = sides.pop()

    plans = [draw_probe(sampler, img, index, transform_kind, rng, params)
             for index, img in enumerate(images)]
    logger.info(f"Evaluating {transform_kind} AEMD of '{sampler.name}' on {n} images "
                f"with {settings.SES_THREADS} worker(s)")

    if settings.SES_THREADS > 1:
        with ThreadPoolExecutor(max_workers=settings.SES_THREADS) as pool:
            records = list(pool.map(lambda pair: evaluate_probe(sampler, *pair), zip(images, plans)))
    else:
        records = [evaluate_probe(sampler, img, plan) for img, plan in zip(images, plans)]

    report = AEMDReport(transform_kind=transform_kind, alpha=alpha_for(side), image_side=side,
                        seed=seed, sampler=sampler.name, records=records).finalize()
    logger.info(f"{transform_kind} AEMD = {report.aggregate:.6f} over {n} images")
    return report

