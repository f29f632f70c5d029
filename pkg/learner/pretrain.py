"""
Feature pretraining on an auxiliary task
The trunk learns to classify which shape family a lone rendered object
belongs to; afterwards the grasp heads are re-initialized and only the trunk
(optionally only its conv layers) carries over.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

import config
from errors import DivergenceError, NonFiniteGradientError
from patches.patch_pipeline import resize
from simulator.models import Placement, Scene, Workspace
from simulator.render import render
from simulator.shape_library import FAMILY_NAMES

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AuxDataset:
    patches: np.ndarray  # (N, 1, S, S)
    labels: np.ndarray
    families: tuple

    def __len__(self):
        return len(self.labels)


@dataclass
class PretrainReport:
    curve: list = field(default_factory=list)
    aux_weight: np.ndarray = None
    aux_bias: np.ndarray = None


def build_shape_dataset(library, n_samples, seed, crop_side, input_side=config.PATCH_INPUT_SIDE,
                        px_per_mm=config.PX_PER_MM, families=FAMILY_NAMES, background=config.BACKGROUND_LEVEL):
    """
    Render lone shapes at random rotation inside a crop-sized window

    Args:
        library: Shapes to draw from; labels index `families`
        n_samples: Number of rendered examples
        crop_side: Window side in pixels before resizing
    """
    if not library:
        raise ValueError("Auxiliary library is empty")
    rng = np.random.default_rng(seed)
    side_mm = crop_side / px_per_mm
    window = Workspace(side_mm, side_mm, px_per_mm)
    patches, labels = [], []
    for _ in range(n_samples):
        shape = library[int(rng.integers(len(library)))]
        placement = Placement(0, shape, side_mm / 2.0, side_mm / 2.0, float(rng.uniform(0.0, 360.0)))
        image, _ = render(Scene(window, (placement,)), background)
        patches.append(resize(image, input_side))
        labels.append(families.index(shape.family))
    stacked = np.stack(patches)[:, None, :, :] if patches else np.zeros((0, 1, input_side, input_side))
    return AuxDataset(stacked, np.array(labels, dtype=np.int64), tuple(families))


def aux_logits(net, x, weight, bias):
    features, caches = net.trunk_forward(x)
    return features @ weight + bias, features, caches


def aux_accuracy(net, dataset, weight, bias, batch_size=256):
    if len(dataset) == 0:
        return None
    predicted = []
    for start in range(0, len(dataset), batch_size):
        logits, _, _ = aux_logits(net, dataset.patches[start:start + batch_size], weight, bias)
        predicted.append(logits.argmax(axis=1))
    return float(np.mean(np.concatenate(predicted) == dataset.labels))


def pretrain_features(net, dataset, train_config, reinit_fc=False):
    """
    Train the trunk on shape-family classification, then reset the grasp heads

    Args:
        net: GraspNet updated in place
        dataset: AuxDataset
        train_config: TrainConfig for the auxiliary phase
        reinit_fc: Also reset the fully-connected trunk, keeping only conv layers

    Returns:
        PretrainReport with per-epoch mean loss and the auxiliary head
    """
    if len(dataset) == 0:
        raise ValueError("Auxiliary dataset is empty")
    n_classes = len(dataset.families)
    aux_rng = net.aux_rng()
    params = net.trunk_parameters()
    params['aux.weight'] = aux_rng.normal(0.0, np.sqrt(2.0 / net.feature_width), size=(net.feature_width, n_classes))
    params['aux.bias'] = np.zeros(n_classes)
    velocity = {}
    rng = np.random.default_rng([train_config.seed, 7])
    report = PretrainReport()

    for epoch in range(train_config.epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        for start in range(0, len(order), train_config.batch_size):
            index = order[start:start + train_config.batch_size]
            labels = dataset.labels[index]
            logits, features, caches = aux_logits(net, dataset.patches[index], params['aux.weight'], params['aux.bias'])
            rows = np.arange(len(index))
            epoch_loss += float(np.sum(logsumexp(logits, axis=1) - logits[rows, labels]))

            dlogits = softmax(logits, axis=1)
            dlogits[rows, labels] -= 1.0
            grads = {'aux.weight': features.T @ dlogits, 'aux.bias': dlogits.sum(axis=0)}
            grads.update(net.trunk_backward(dlogits @ params['aux.weight'].T, caches))

            for name, grad in grads.items():
                if not np.all(np.isfinite(grad)):
                    raise NonFiniteGradientError(f"Non-finite gradient in {name} during pretraining")
                grad = grad / len(index)
                velocity[name] = grad if name not in velocity else train_config.momentum * velocity[name] + grad
                params[name] -= train_config.learning_rate * velocity[name]

        mean_loss = epoch_loss / len(order)
        if not np.isfinite(mean_loss):
            raise DivergenceError(f"Pretraining loss diverged at epoch {epoch}")
        report.curve.append(mean_loss)
        logger.info(f"Pretrain epoch {epoch}: loss={mean_loss:.4f}")

    report.aux_weight, report.aux_bias = params['aux.weight'], params['aux.bias']
    if reinit_fc:
        net.reinit_fc()
    net.reinit_heads()
    return report
