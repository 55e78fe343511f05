# gradcheck.py

"""Finite-difference check of every differentiable op and of a full SES block.

    python main.py gradcheck --seed 0
"""

import sys
from typing import Callable, Dict, List, Tuple

import numpy as np
import pandas as pd

from autograd import Tensor, ops
from autograd.gradcheck import check_gradients
from layers import SESBlock
from models import RNMConfig, SESLayerConfig
from utils import setup_logger


logger = setup_logger('gradcheck')

MAX_COORDS = 24
BLOCK_SPATIAL = 8

Case = Tuple[Callable[[], Tensor], Dict[str, Tensor]]


def _param(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _weighted(out: Tensor, rng: np.random.Generator) -> Callable[[Tensor], Tensor]:
    """Random projection so every output element carries its own gradient"""
    weights = Tensor(rng.normal(size=out.shape))
    return lambda y: ops.sum(ops.mul(y, weights))


def _case(fn: Callable[..., Tensor], inputs: Dict[str, Tensor], rng: np.random.Generator) -> Case:
    project = _weighted(fn(**inputs), rng)
    return (lambda: project(fn(**inputs))), inputs


def op_cases(rng: np.random.Generator) -> Dict[str, Case]:
    labels = rng.integers(0, 5, size=6)
    gamma, beta = _param(rng, 3), _param(rng, 3)
    return {
        'add': _case(lambda a, b: ops.add(a, b), {'a': _param(rng, 2, 3, 4), 'b': _param(rng, 3, 4)}, rng),
        'sub': _case(lambda a, b: ops.sub(a, b), {'a': _param(rng, 2, 3), 'b': _param(rng, 2, 3)}, rng),
        'mul': _case(lambda a, b: ops.mul(a, b), {'a': _param(rng, 2, 3, 4), 'b': _param(rng, 4)}, rng),
        'neg': _case(lambda a: ops.neg(a), {'a': _param(rng, 5)}, rng),
        'matmul': _case(lambda a, b: ops.matmul(a, b), {'a': _param(rng, 3, 4), 'b': _param(rng, 4, 2)}, rng),
        'linear': _case(lambda x, w, b: ops.linear(x, w, b, 1),
                        {'x': _param(rng, 2, 3, 4), 'w': _param(rng, 5, 3), 'b': _param(rng, 5)}, rng),
        'reshape': _case(lambda x: ops.reshape(x, (4, 6)), {'x': _param(rng, 2, 3, 4)}, rng),
        'transpose': _case(lambda x: ops.transpose(x, (2, 0, 1)), {'x': _param(rng, 2, 3, 4)}, rng),
        'move_axis': _case(lambda x: ops.move_axis(x, 1, -1), {'x': _param(rng, 2, 3, 4)}, rng),
        'repeat': _case(lambda x: ops.repeat(x, 3, axis=1), {'x': _param(rng, 2, 2, 3)}, rng),
        'concat': _case(lambda a, b: ops.concat([a, b], axis=1),
                        {'a': _param(rng, 2, 1, 3), 'b': _param(rng, 2, 2, 3)}, rng),
        'sum': _case(lambda x: ops.sum(x, axes=(0, 2)), {'x': _param(rng, 2, 3, 4)}, rng),
        'mean': _case(lambda x: ops.mean(x, axes=1), {'x': _param(rng, 2, 3, 4)}, rng),
        'relu': _case(lambda x: ops.relu(x), {'x': _param(rng, 3, 5)}, rng),
        'softmax': _case(lambda x: ops.softmax(x, axes=(2,)), {'x': _param(rng, 2, 3, 9, 2)}, rng),
        'unfold': _case(lambda x: ops.unfold(x, 3), {'x': _param(rng, 1, 2, 5, 5)}, rng),
        'maxpool2': _case(lambda x: ops.maxpool2(x), {'x': _param(rng, 1, 2, 5, 4)}, rng),
        'batch_norm_train': _case(lambda x, gamma, beta: ops.batch_norm_train(x, gamma, beta, 1e-5)[0],
                                  {'x': _param(rng, 4, 3, 2, 2), 'gamma': gamma, 'beta': beta}, rng),
        'batch_norm_eval': _case(
            lambda x, gamma, beta: ops.batch_norm_eval(x, gamma, beta, np.full(3, 0.2), np.full(3, 1.5), 1e-5),
            {'x': _param(rng, 4, 3, 2, 2), 'gamma': _param(rng, 3), 'beta': _param(rng, 3)}, rng),
        'cross_entropy': ((lambda: ops.cross_entropy(ce_inputs['logits'], labels)),
                          (ce_inputs := {'logits': _param(rng, 6, 5)})),
    }


def block_case(rng: np.random.Generator, seed: int, channels: int, k: int) -> Case:
    """Residual SES block with RNM on Q and K; the noise stream restarts per evaluation"""
    config = SESLayerConfig(c_in=channels, c_out=channels, k=k, r1=1, r2=4, r3=4)
    block = SESBlock(config, RNMConfig(), rng, np.random.default_rng(seed))
    x = _param(rng, 2, channels, BLOCK_SPATIAL, BLOCK_SPATIAL)

    def forward() -> Tensor:
        block.norm.rng = np.random.default_rng([seed, 1])
        return block(x)

    project = _weighted(forward(), rng)
    tensors = {'x': x}
    tensors.update(dict(block.named_parameters()))
    return (lambda: project(forward())), tensors


def run_gradcheck(seed: int, repeats: int = 10, channels: int = 16, k: int = 7) -> pd.DataFrame:
    """One row per (seed, case, tensor) with the largest per-coordinate relative error"""
    rows: List[Dict] = []
    for offset in range(repeats):
        run_seed = seed + offset
        rng = np.random.default_rng(run_seed)
        cases = op_cases(rng)
        cases['ses_block'] = block_case(rng, run_seed, channels, k)
        for name, (loss_fn, tensors) in cases.items():
            results = check_gradients(loss_fn, tensors, max_coords=MAX_COORDS, rng=rng)
            rows.extend({'seed': run_seed, 'case': name, 'tensor': r.name,
                         'checked': r.checked, 'relative_error': r.relative_error} for r in results)
        logger.info(f"Seed {run_seed}: checked {len(cases)} cases")
    return pd.DataFrame(rows)


def main(seed: int = 0, repeats: int = 10, channels: int = 16, k: int = 7, tolerance: float = 1e-4) -> bool:
    frame = run_gradcheck(seed, repeats, channels, k)
    worst = frame.groupby('case')['relative_error'].max().sort_values(ascending=False)
    for case, error in worst.items():
        status = 'ok' if error < tolerance else 'FAIL'
        logger.info(f"  {case:<18} max relative error {error:.3e} {status}")
    passed = bool((worst < tolerance).all())
    if passed:
        logger.info(f"All {len(worst)} cases within {tolerance:g} over {repeats} seed(s)")
    else:
        logger.error(f"{int((worst >= tolerance).sum())} case(s) exceed {tolerance:g}")
    return passed


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
