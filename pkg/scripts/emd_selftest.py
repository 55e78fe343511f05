# emd_selftest.py

"""Checks the transport solver against independent oracles.

    python main.py emd-selftest --seed 0

- 1-D instances against the closed-form sorted-merge Wasserstein distance
- small 2-D instances against exhaustive enumeration of the transportation
  polytope's vertices, and uniform n-point instances against all permutations
- metric axioms on random triples
"""

import itertools
import sys
from typing import Tuple

import numpy as np

from models import SamplingGraph
from services.emd_solver import emd, ground_distance
from utils import setup_logger


logger = setup_logger('emd_selftest')

ENUMERATION_INSTANCES = 50
AXIOM_TRIPLES = 500
MAX_ENUMERATED_CELLS = 12
MAX_PERMUTATION_POINTS = 6


def wasserstein_1d(a_pos: np.ndarray, a_w: np.ndarray, b_pos: np.ndarray, b_w: np.ndarray) -> float:
    """Integral of |CDF_a - CDF_b| via one sorted sweep over all positions"""
    positions = np.concatenate([a_pos, b_pos])
    signed = np.concatenate([a_w, -b_w])
    order = np.argsort(positions, kind='stable')
    positions, signed = positions[order], signed[order]
    cdf_gap = np.cumsum(signed)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(positions)))


def enumerate_vertices(weights_a: np.ndarray, weights_b: np.ndarray, cost: np.ndarray) -> float:
    """Minimum cost over every basic feasible solution of the transportation problem"""
    m, n = cost.shape
    if m * n > MAX_ENUMERATED_CELLS:
        raise ValueError(f"{m}x{n} instance is too large to enumerate")
    constraints = np.zeros((m + n, m * n))
    for i in range(m):
        constraints[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        constraints[m + j, j::n] = 1.0
    rhs = np.concatenate([weights_a, weights_b])
    flat_cost = cost.reshape(-1)

    best = np.inf
    for basis in itertools.combinations(range(m * n), m + n - 1):
        columns = constraints[:, basis]
        if np.linalg.matrix_rank(columns) < m + n - 1:
            continue
        solution, *_ = np.linalg.lstsq(columns, rhs, rcond=None)
        if np.any(solution < -1e-12) or np.abs(columns @ solution - rhs).max() > 1e-12:
            continue
        best = min(best, float(flat_cost[list(basis)] @ solution))
    return best


def best_permutation(cost: np.ndarray) -> float:
    """Uniform n-to-n optimum: the cheapest permutation (Birkhoff vertices)"""
    n = cost.shape[0]
    rows = np.arange(n)
    return min(float(cost[rows, list(perm)].sum()) / n for perm in itertools.permutations(range(n)))


def random_graph(rng: np.random.Generator, size: int, spread: float = 10.0) -> SamplingGraph:
    return SamplingGraph.from_masses(rng.uniform(0, spread, size=(size, 2)), rng.uniform(0.05, 1.0, size))


def random_1d(rng: np.random.Generator) -> Tuple[SamplingGraph, SamplingGraph, float]:
    sizes = rng.integers(1, 9, size=2)
    a_pos, b_pos = rng.uniform(-20, 20, sizes[0]), rng.uniform(-20, 20, sizes[1])
    a_w = rng.uniform(0.05, 1.0, sizes[0])
    b_w = rng.uniform(0.05, 1.0, sizes[1])
    a_w, b_w = a_w / a_w.sum(), b_w / b_w.sum()
    # embed on a random line through a random origin
    angle = rng.uniform(0, np.pi)
    direction = np.array([np.cos(angle), np.sin(angle)])
    origin = rng.uniform(-5, 5, 2)
    a = SamplingGraph(origin + a_pos[:, None] * direction, a_w)
    b = SamplingGraph(origin + b_pos[:, None] * direction, b_w)
    return a, b, wasserstein_1d(a_pos, a_w, b_pos, b_w)


def check_1d(rng: np.random.Generator, instances: int) -> float:
    worst = 0.0
    for _ in range(instances):
        a, b, expected = random_1d(rng)
        worst = max(worst, abs(emd(a, b) - expected))
    logger.info(f"1-D oracle: worst deviation {worst:.3e} over {instances} instances")
    return worst


def check_enumeration(rng: np.random.Generator, instances: int) -> float:
    worst = 0.0
    for index in range(instances):
        if index % 2:
            n = int(rng.integers(2, MAX_PERMUTATION_POINTS + 1))
            a = SamplingGraph(rng.uniform(0, 10, (n, 2)), np.full(n, 1.0 / n))
            b = SamplingGraph(rng.uniform(0, 10, (n, 2)), np.full(n, 1.0 / n))
            expected = best_permutation(ground_distance(a, b))
        else:
            m = int(rng.integers(1, 5))
            n = int(rng.integers(1, min(MAX_ENUMERATED_CELLS // m, 6) + 1))
            a, b = random_graph(rng, m), random_graph(rng, n)
            expected = enumerate_vertices(a.weights, b.weights, ground_distance(a, b))
        worst = max(worst, abs(emd(a, b) - expected))
    logger.info(f"Vertex enumeration: worst deviation {worst:.3e} over {instances} instances")
    return worst


def check_axioms(rng: np.random.Generator, triples: int, tolerance: float) -> int:
    violations = 0
    for _ in range(triples):
        a, b, c = (random_graph(rng, int(rng.integers(1, 7))) for _ in range(3))
        ab, ba, bc, ac = emd(a, b), emd(b, a), emd(b, c), emd(a, c)
        if ab < 0 or abs(ab - ba) > tolerance or ac > ab + bc + tolerance:
            violations += 1
    logger.info(f"Metric axioms: {violations} violation(s) over {triples} triples")
    return violations


def main(seed: int = 0, instances: int = 200, tolerance: float = 1e-9) -> bool:
    rng = np.random.default_rng(seed)
    worst_1d = check_1d(rng, instances)
    worst_enum = check_enumeration(rng, ENUMERATION_INSTANCES)
    violations = check_axioms(rng, AXIOM_TRIPLES, tolerance)
    passed = worst_1d <= tolerance and worst_enum <= tolerance and violations == 0
    if passed:
        logger.info("Transport solver agrees with every oracle")
    else:
        logger.error("Transport solver disagrees with an oracle")
    return passed


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
