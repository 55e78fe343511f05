# emd_solver.py

from dataclasses import dataclass

import numpy as np
import ot

from config import settings
from models import SamplingGraph
from utils import EMDError
from utils import setup_logger


logger = setup_logger('emd_solver')


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Optimal coupling between two sampling graphs.

    plan[i, j] is the mass moved from source.points[i] to target.points[j];
    rows sum to source.weights and columns to target.weights.
    """
    source: SamplingGraph
    target: SamplingGraph
    plan: np.ndarray
    ground_cost: np.ndarray
    cost: float

    @property
    def moved_mass(self) -> float:
        """Mass that leaves its support point (zero-distance cells excluded)"""
        return float(self.plan[self.ground_cost > 0].sum())

    def flows(self, min_mass: float = 1e-12):
        """(source point, target point, mass) for every non-negligible edge"""
        rows, cols = np.nonzero(self.plan > min_mass)
        return [(self.source.points[i], self.target.points[j], float(self.plan[i, j]))
                for i, j in zip(rows, cols)]


def ground_distance(a: SamplingGraph, b: SamplingGraph) -> np.ndarray:
    """Euclidean pixel distance between every pair of support points"""
    diff = a.points[:, None, :] - b.points[None, :, :]
    return np.sqrt(np.einsum('ijk,ijk->ij', diff, diff))


def _identical(a: SamplingGraph, b: SamplingGraph) -> bool:
    return (a.points.shape == b.points.shape
            and np.array_equal(a.points, b.points)
            and np.array_equal(a.weights, b.weights))


def transport_plan(a: SamplingGraph, b: SamplingGraph) -> TransportPlan:
    """Exact optimal transport between a and b via the network simplex.

    Supports are the merged, pruned points of each graph.
    """
    if not isinstance(a, SamplingGraph) or not isinstance(b, SamplingGraph):
        raise EMDError("transport_plan expects two SamplingGraph instances")
    cost_matrix = ground_distance(a, b)

    if _identical(a, b):
        return TransportPlan(a, b, np.diag(a.weights), cost_matrix, 0.0)

    # both marginals must carry exactly the same total for the solver
    weights_a = a.weights / a.weights.sum()
    weights_b = b.weights / b.weights.sum()
    try:
        plan, log = ot.emd(weights_a, weights_b, cost_matrix,
                           numItermax=settings.EMD_MAX_ITER, log=True)
    except (ValueError, AssertionError) as e:
        logger.error(f"Transport solver rejected a {len(a)}x{len(b)} instance: {e}")
        raise EMDError(f"transport solver failed: {e}") from e

    if log.get('warning'):
        logger.error(f"Transport solver did not reach an optimum: {log['warning']}")
        raise EMDError(f"transport solver did not converge: {log['warning']}")

    plan = np.asarray(plan, dtype=np.float64)
    cost = float(np.sum(plan * cost_matrix))
    logger.debug(f"Solved {len(a)}x{len(b)} transport, cost={cost:.6g}")
    return TransportPlan(a, b, plan, cost_matrix, cost)


def emd(a: SamplingGraph, b: SamplingGraph) -> float:
    """Earth mover's distance with Euclidean ground distance, in pixel units"""
    return transport_plan(a, b).cost
