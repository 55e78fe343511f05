"""
Sampling-Equivariant Self-Attention toolkit
Generates the shapes dataset, trains SES networks and measures their sampling equivariance
"""

import json
import signal
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from config import settings
from config.run_config import RunConfig, parse_args
from geometry import ImageGrid
from layers import load_checkpoint
from models import NetworkConfig, RNMConfig, TrainConfig
from scripts import emd_selftest, gradcheck
from services import (
    SHAPE_CLASSES,
    IntensityMaskSampler,
    LocationSampler,
    NetworkSampler,
    Trainer,
    UniformMaskSampler,
    aemd,
    evaluate,
    export_masks,
    gen_dataset,
    load_split,
)
from utils import AutogradError, ConfigError, EMDError, SESError
from utils import setup_logger


logger = setup_logger('main')


def _emit(result: Dict) -> None:
    """Machine-readable result line on stdout"""
    print(json.dumps(result), flush=True)


def run_gen_data(config: RunConfig) -> None:
    manifest = gen_dataset(config.out, config.n_per_class, config.side, config.seed, config.val_fraction)
    _emit({'images': len(manifest), 'out': config.out})


def network_from(config: RunConfig) -> NetworkConfig:
    network = NetworkConfig(
        widths=config.widths,
        blocks_per_stage=config.blocks_per_stage,
        num_classes=len(SHAPE_CLASSES),
        k=config.k, r1=config.r1, r2=config.r2, r3=config.r3,
        rnm=RNMConfig.from_string(config.rnm_routing, config.rnm_r),
    )
    return network.san_ablation() if config.ablation == 'san' else network


def run_train(config: RunConfig) -> None:
    network = network_from(config)
    tc = TrainConfig(epochs=config.epochs, batch_size=config.batch_size, base_lr=config.lr,
                     momentum=config.momentum, weight_decay=config.weight_decay, seed=config.seed)
    trainer = Trainer(network, tc, config.data, config.out)
    Path(config.out).mkdir(parents=True, exist_ok=True)
    config.to_json(Path(config.out) / 'run_config.json')

    def signal_handler(signum, frame):
        """Finish the current step, checkpoint, exit 0"""
        logger.info(f"Received signal {signum}. Stopping after the current step...")
        trainer.request_stop()

    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    result = trainer.run()
    _emit({'checkpoint': str(result.checkpoint), 'seed': tc.seed, 'epochs': result.epochs_completed,
           'initial_loss': result.initial_loss,
           'final_loss': result.epoch_losses[-1] if result.epoch_losses else None,
           'val_acc': result.val_accuracies[-1] if result.val_accuracies else None,
           'stopped_early': result.stopped_early})


def run_evaluate(config: RunConfig) -> None:
    result = evaluate(config.model, config.data, config.split)
    _emit({'accuracy': result.accuracy, 'per_class': result.per_class, 'count': result.count})


def build_sampler(config: RunConfig):
    if config.sampler == 'network':
        if config.model is None:
            raise ConfigError("option 'model' is required for the network sampler")
        return NetworkSampler(load_checkpoint(config.model))
    if config.sampler == 'uniform':
        return UniformMaskSampler(k=config.k)
    if config.sampler == 'intensity':
        return IntensityMaskSampler(k=config.k)
    return LocationSampler()


def run_eval_aemd(config: RunConfig) -> None:
    sampler = build_sampler(config)
    images, _ = load_split(config.data, config.split)
    grids = [ImageGrid.from_array(image) for image in images[:config.n]]
    report = aemd(sampler, grids, config.transform, config.n, np.random.default_rng(config.seed),
                  params=config.params, seed=config.seed)
    report.write_json(config.out)
    _emit({'transform': report.transform_kind, 'aemd': report.aggregate, 'images': len(report.records),
           'out': config.out})


def run_export_masks(config: RunConfig) -> None:
    written = export_masks(config.model, config.image, config.layer, (config.row, config.col), config.out)
    _emit({'overlays': [str(path) for path in written]})


def run_gradcheck(config: RunConfig) -> None:
    if not gradcheck.main(config.seed, config.repeats, config.channels, config.k, config.tolerance):
        raise AutogradError(f"gradient check exceeded relative error {config.tolerance:g}")
    _emit({'gradcheck': 'passed'})


def run_emd_selftest(config: RunConfig) -> None:
    if not emd_selftest.main(config.seed, config.instances, config.tolerance):
        raise EMDError(f"transport solver disagrees with an oracle beyond {config.tolerance:g}")
    _emit({'emd_selftest': 'passed'})


COMMANDS: Dict[str, Callable[[RunConfig], None]] = {
    'gen-data': run_gen_data,
    'train': run_train,
    'evaluate': run_evaluate,
    'eval-aemd': run_eval_aemd,
    'export-masks': run_export_masks,
    'gradcheck': run_gradcheck,
    'emd-selftest': run_emd_selftest,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    args: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        config = parse_args(args)
        logger.info(f"Running '{config.command}' with {settings}")
        COMMANDS[config.command](config)
    except SESError as e:
        logger.debug(f"{type(e).__name__}: {e}", exc_info=True)
        print(f"error: {e.category}: " + str(e).replace("\n", " "), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"error: internal: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
