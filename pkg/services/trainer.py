# trainer.py

import json
import math
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from autograd import Tensor, backward, no_grad
from config import settings
from layers import SESNet, cross_entropy, load_checkpoint, save_checkpoint
from models import NetworkConfig, TrainConfig
from services.dataset import SHAPE_CLASSES, load_split
from utils import CheckpointError, NonFiniteError, TrainingDivergedError
from utils import setup_logger


logger = setup_logger('trainer')

CHECKPOINT_DIR = 'checkpoint'
EVAL_BATCH = 64
# shuffle stream, separate from the per-block RNM noise streams
SHUFFLE_STREAM = 1


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """base * (1 + cos(pi * t / T)) / 2: base at t=0, base/2 at T/2, 0 at T"""
    return base_lr * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0


class SGD:
    """Momentum SGD; weight decay is added to the gradient before the momentum update"""

    def __init__(self, params: Sequence[Tensor], momentum: float, weight_decay: float):
        self.params = list(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float) -> None:
        for param, velocity in zip(self.params, self.velocity):
            grad = param.grad.data if param.grad is not None else np.zeros_like(param.data)
            if self.weight_decay:
                grad = grad + self.weight_decay * param.data
            velocity *= self.momentum
            velocity += grad
            param.data -= lr * velocity


@dataclass
class EvalResult:
    accuracy: float
    per_class: Dict[str, float]
    count: int


@dataclass
class TrainResult:
    checkpoint: Path
    epochs_completed: int
    initial_loss: float
    epoch_losses: List[float] = field(default_factory=list)
    val_accuracies: List[float] = field(default_factory=list)
    stopped_early: bool = False


def predict(net: SESNet, images: np.ndarray) -> np.ndarray:
    """Eval-mode argmax labels, batch by batch"""
    net.eval()
    predictions = []
    with no_grad():
        for start in range(0, len(images), EVAL_BATCH):
            logits = net(Tensor(images[start:start + EVAL_BATCH]))
            predictions.append(np.argmax(logits.data, axis=1))
    return np.concatenate(predictions)


def score(predictions: np.ndarray, labels: np.ndarray) -> EvalResult:
    frame = pd.DataFrame({'label': labels, 'correct': predictions == labels})
    per_class = frame.groupby('label')['correct'].mean()
    names = {index: name for index, name in enumerate(SHAPE_CLASSES)}
    return EvalResult(
        accuracy=float(frame['correct'].mean()),
        per_class={names.get(int(label), str(label)): float(value) for label, value in per_class.items()},
        count=len(frame),
    )


def check_compatible(net: SESNet, images: np.ndarray, labels: np.ndarray) -> None:
    """Reject a network whose input channels or class count do not fit the data"""
    config = net.config
    if images.shape[1] != config.in_channels:
        raise CheckpointError(f"network expects {config.in_channels} input channels, "
                              f"dataset images have {images.shape[1]}")
    if labels.min() < 0 or labels.max() >= config.num_classes:
        raise CheckpointError(f"dataset labels span [{labels.min()}, {labels.max()}], "
                              f"network has {config.num_classes} classes")


def evaluate(model: Union[SESNet, str, Path], data_dir: Union[str, Path], split: str = 'val') -> EvalResult:
    """Top-1 accuracy of a network (or checkpoint directory) on one split"""
    net = model if isinstance(model, SESNet) else load_checkpoint(model)
    images, labels = load_split(data_dir, split)
    check_compatible(net, images, labels)
    result = score(predict(net, images), labels)
    logger.info(f"Accuracy on '{split}': {result.accuracy:.4f} over {result.count} images")
    return result


class Trainer:
    """Trains an SESNet on the shapes dataset with SGD and a per-step cosine schedule"""

    def __init__(self, network: NetworkConfig, tc: TrainConfig, data_dir: Union[str, Path],
                 out_dir: Union[str, Path], stop_event: Optional[threading.Event] = None):
        self.network = network
        self.tc = tc
        self.data_dir = Path(data_dir)
        self.out_dir = Path(out_dir)
        self.stop_event = stop_event or threading.Event()
        self.net = SESNet(network, seed=tc.seed)
        self.optimizer = SGD(self.net.parameters(), tc.momentum, tc.weight_decay)
        self.metrics_path = self.out_dir / settings.METRICS_FILE

    def request_stop(self) -> None:
        self.stop_event.set()

    def _write_metrics(self, record: Dict) -> None:
        with self.metrics_path.open('a') as handle:
            handle.write(json.dumps(record) + '\n')

    def _step(self, images: np.ndarray, labels: np.ndarray, lr: float, epoch: int, step: int) -> float:
        self.net.train()
        self.net.zero_grad()
        try:
            loss = cross_entropy(self.net(Tensor(images)), labels)
            backward(loss)
        except NonFiniteError as e:
            logger.error(f"Non-finite values at epoch {epoch} step {step} (lr={lr:.4g}): {e}")
            raise TrainingDivergedError(f"training diverged at epoch {epoch} step {step} "
                                        f"(lr={lr:.4g}): {e}") from e
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergedError(f"loss is {value} at epoch {epoch} step {step} (lr={lr:.4g})")
        self.optimizer.step(lr)
        return value

    def run(self) -> TrainResult:
        train_images, train_labels = load_split(self.data_dir, 'train')
        val_images, val_labels = load_split(self.data_dir, 'val')
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.metrics_path.write_text('')

        steps_per_epoch = math.ceil(len(train_labels) / self.tc.batch_size)
        total_steps = self.tc.epochs * steps_per_epoch
        shuffle_rng = np.random.default_rng([self.tc.seed, SHUFFLE_STREAM])
        logger.info(f"Training {self.net.parameter_count()} parameters on {len(train_labels)} images: "
                    f"{self.tc.epochs} epochs x {steps_per_epoch} steps")

        result = TrainResult(checkpoint=self.out_dir / CHECKPOINT_DIR, epochs_completed=0,
                             initial_loss=float('nan'))
        step = 0
        for epoch in range(1, self.tc.epochs + 1):
            order = shuffle_rng.permutation(len(train_labels))
            losses = []
            for start in range(0, len(order), self.tc.batch_size):
                batch = order[start:start + self.tc.batch_size]
                lr = cosine_lr(self.tc.base_lr, step, total_steps)
                losses.append(self._step(train_images[batch], train_labels[batch], lr, epoch, step))
                if step == 0:
                    result.initial_loss = losses[0]
                step += 1
                if self.stop_event.is_set():
                    break

            val = score(predict(self.net, val_images), val_labels)
            record = {'epoch': epoch, 'lr': lr, 'train_loss': float(np.mean(losses)),
                      'val_acc': val.accuracy}
            self._write_metrics(record)
            logger.info(f"Epoch {epoch}/{self.tc.epochs}: loss={record['train_loss']:.4f} "
                        f"val_acc={val.accuracy:.4f} lr={lr:.5f}")
            result.epoch_losses.append(record['train_loss'])
            result.val_accuracies.append(val.accuracy)
            result.epochs_completed = epoch

            if self.stop_event.is_set():
                logger.info(f"Stop requested, checkpointing after epoch {epoch} step {step}")
                result.stopped_early = True
                break

        save_checkpoint(self.net, result.checkpoint, extra={
            'train_config': asdict(self.tc),
            'epochs_completed': result.epochs_completed,
            'stopped_early': result.stopped_early,
            'val_accuracy': result.val_accuracies[-1] if result.val_accuracies else None,
        })
        return result


def train(network: NetworkConfig, tc: TrainConfig, data_dir: Union[str, Path], out_dir: Union[str, Path],
          stop_event: Optional[threading.Event] = None) -> TrainResult:
    return Trainer(network, tc, data_dir, out_dir, stop_event).run()
