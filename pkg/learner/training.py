"""
Training loop for the grasp network
SGD with momentum on the masked loss; the loss is reported as a batch sum and
the step uses its batch mean. Replication weights expand the epoch shuffle.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

import config
from errors import DivergenceError, NonFiniteGradientError
from learner.loss import masked_cross_entropy
from worker_pool import run_ordered

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = config.STAGE0_LEARNING_RATE
    epochs: int = config.STAGE0_EPOCHS
    batch_size: int = config.BATCH_SIZE
    momentum: float = config.MOMENTUM
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


def stage_schedule(stage, seed=0, batch_size=config.BATCH_SIZE, momentum=config.MOMENTUM):
    """Stage 0: lr 0.01 for 20 epochs; later stages: lr 0.001 for 5 epochs"""
    if stage == 0:
        return [TrainConfig(config.STAGE0_LEARNING_RATE, config.STAGE0_EPOCHS, batch_size, momentum, seed)]
    return [TrainConfig(config.STAGEK_LEARNING_RATE, config.STAGEK_EPOCHS, batch_size, momentum, seed)]


@dataclass(frozen=True)
class EpochSummary:
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainResult:
    net: object
    curve: list = field(default_factory=list)

    @property
    def final_loss(self):
        return self.curve[-1].loss if self.curve else None


class SGD:
    """Momentum SGD: v <- mu * v + g; p <- p - lr * v"""

    def __init__(self, learning_rate, momentum):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = {}

    def step(self, params, grads):
        for name, grad in grads.items():
            velocity = self.velocity.get(name)
            velocity = grad.copy() if velocity is None else self.momentum * velocity + grad
            self.velocity[name] = velocity
            params[name] -= self.learning_rate * velocity


def _chunk_gradients(net, x, bins, labels):
    logits, cache = net.forward(x)
    report, dlogits = masked_cross_entropy(logits, bins, labels)
    return report, net.backward(dlogits, cache), logits


def batch_gradients(net, x, bins, labels, workers=1, chunks=config.GRADIENT_CHUNKS):
    """
    Summed-loss gradients of one batch

    The batch is always split into `chunks` contiguous pieces whose gradients
    are added in chunk order; `workers` only sets how many run at once, so the
    result is identical for every worker count.

    Returns:
        (total loss, contributions, grads, logits)
    """
    if chunks <= 1 or len(x) < 2:
        report, grads, logits = _chunk_gradients(net, x, bins, labels)
        return report.total, report.contributions, grads, logits

    pieces = np.array_split(np.arange(len(x)), min(chunks, len(x)))
    tasks = [(lambda idx=idx: _chunk_gradients(net, x[idx], bins[idx], labels[idx])) for idx in pieces]
    results = run_ordered(tasks, workers)
    grads = {}
    for _, chunk_grads, _ in results:
        for name, value in chunk_grads.items():
            grads[name] = value if name not in grads else grads[name] + value
    contributions = np.concatenate([report.contributions for report, _, _ in results])
    logits = np.concatenate([chunk_logits for _, _, chunk_logits in results])
    return float(sum(report.total for report, _, _ in results)), contributions, grads, logits


def backward_and_step(net, batch, train_config, optimizer=None, workers=1):
    """
    One optimizer step on a batch

    Args:
        net: GraspNet updated in place
        batch: (x, bins, labels)
        train_config: TrainConfig (learning rate, momentum)
        optimizer: SGD carrying momentum between steps

    Returns:
        (loss total, logits computed before the step)

    Raises:
        NonFiniteGradientError: a gradient entry is NaN or infinite
    """
    x, bins, labels = batch
    optimizer = optimizer or SGD(train_config.learning_rate, train_config.momentum)
    total, _, grads, logits = batch_gradients(net, x, np.asarray(bins), np.asarray(labels), workers)
    scale = 1.0 / len(x)
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(f"Non-finite gradient in {name} (batch loss {total})")
        grads[name] = grad * scale
    optimizer.step(net.parameters(), grads)
    return total, logits


def train(net, arrays, schedule, workers=1, phase_offset=0):
    """
    Train on TrainingArrays following a list of TrainConfig phases

    Args:
        net: GraspNet, updated in place
        arrays: TrainingArrays (patches, bins, labels, replication weights)
        schedule: List of TrainConfig run in order
        workers: Threads computing gradient chunks

    Returns:
        TrainResult with one EpochSummary per epoch (mean per-row loss, training accuracy)

    Raises:
        DivergenceError: epoch loss became non-finite
    """
    if len(arrays) == 0:
        raise ValueError("Training set is empty")
    result = TrainResult(net=net)
    rows = np.repeat(np.arange(len(arrays)), arrays.weights)
    epoch_number = 0

    for phase, train_config in enumerate(schedule):
        rng = np.random.default_rng([train_config.seed, phase + phase_offset])
        optimizer = SGD(train_config.learning_rate, train_config.momentum)
        logger.info(f"Training phase {phase}: lr={train_config.learning_rate} epochs={train_config.epochs} "
                    f"rows={len(rows)} batch={train_config.batch_size}")

        for _ in range(train_config.epochs):
            order = rng.permutation(rows)
            epoch_loss, correct = 0.0, 0
            for start in range(0, len(order), train_config.batch_size):
                index = order[start:start + train_config.batch_size]
                bins, labels = arrays.bins[index], arrays.labels[index]
                total, logits = backward_and_step(net, (arrays.patches[index], bins, labels), train_config,
                                                  optimizer, workers)
                epoch_loss += total
                trial = logits[np.arange(len(index)), bins]
                correct += int(np.sum((trial[:, 1] >= trial[:, 0]) == (labels == 1)))

            mean_loss = epoch_loss / len(order)
            if not np.isfinite(mean_loss):
                raise DivergenceError(f"Loss diverged at epoch {epoch_number} ({mean_loss})")
            result.curve.append(EpochSummary(epoch_number, mean_loss, correct / len(order)))
            logger.info(f"Epoch {epoch_number}: loss={mean_loss:.4f} train_acc={correct / len(order):.3f}")
            epoch_number += 1

    return result


def training_accuracy(net, arrays):
    scores = net.scores(arrays.patches)
    predicted = scores[np.arange(len(arrays)), arrays.bins] >= 0.5
    return float(np.mean(predicted == (arrays.labels == 1)))


def write_loss_curve(path, curve):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['epoch', 'loss'])
        for summary in curve:
            writer.writerow([summary.epoch, repr(float(summary.loss))])
