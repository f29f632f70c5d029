"""
Eighteen linear SVMs, one per angle bin
Primal objective 0.5 * |w|^2 + C * sum(hinge), minimized by full-batch
subgradient descent. A step that raises the objective is retried at half
the step size, so the recorded objective never increases.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

import config
from learner.checkpoint import read_container, write_container

logger = logging.getLogger(__name__)

SVM_KIND = 'svm'
MAX_HALVINGS = 30


@dataclass
class LinearSvm:
    weight: np.ndarray
    bias: float
    objective_curve: list = field(default_factory=list)


def svm_objective(weight, bias, x, y, c):
    margins = y * (x @ weight + bias)
    return 0.5 * float(weight @ weight) + c * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def fit_linear_svm(x, y, c, epochs=config.SVM_EPOCHS):
    """
    Args:
        x: (n, d) descriptors
        y: (n,) labels in {-1, +1}

    Returns:
        LinearSvm with the per-epoch objective
    """
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    weight, bias = np.zeros(x.shape[1]), 0.0
    objective = svm_objective(weight, bias, x, y, c)
    step = 1.0 / (1.0 + c * len(y))
    curve = [objective]

    for _ in range(epochs):
        active = y * (x @ weight + bias) < 1.0
        grad_w = weight - c * (y[active] @ x[active])
        grad_b = -c * float(np.sum(y[active]))
        for _ in range(MAX_HALVINGS):
            candidate_w, candidate_b = weight - step * grad_w, bias - step * grad_b
            candidate = svm_objective(candidate_w, candidate_b, x, y, c)
            if candidate <= objective:
                weight, bias, objective = candidate_w, candidate_b, candidate
                break
            step /= 2.0
        curve.append(objective)
    return LinearSvm(weight, bias, curve)


@dataclass
class SvmModel:
    weights: np.ndarray  # (18, d)
    bias: np.ndarray  # (18,)
    c_values: list
    degenerate: list

    def decision(self, descriptors, bins):
        descriptors, bins = np.atleast_2d(descriptors), np.asarray(bins, dtype=np.int64)
        return np.einsum('nd,nd->n', descriptors, self.weights[bins]) + self.bias[bins]


def _split(n, fraction, rng):
    order = rng.permutation(n)
    n_validation = int(round(n * fraction))
    return order[n_validation:], order[:n_validation]


def svm_train(descriptors, bins, labels, c_grid=config.SVM_C_GRID, validation_fraction=config.SVM_VALIDATION_FRACTION,
              epochs=config.SVM_EPOCHS, seed=0):
    """
    Train one classifier per bin, choosing C on a held-out validation split

    Bins lacking one of the classes get a constant majority classifier
    (negative for an empty bin).

    Returns:
        SvmModel
    """
    descriptors = np.asarray(descriptors, dtype=np.float64)
    bins, labels = np.asarray(bins, dtype=np.int64), np.asarray(labels, dtype=np.int64)
    n_bins = config.NUM_ANGLE_BINS
    weights = np.zeros((n_bins, descriptors.shape[1]))
    bias = np.zeros(n_bins)
    c_values, degenerate = [None] * n_bins, [False] * n_bins

    for bin_index in range(n_bins):
        selected = bins == bin_index
        x, y = descriptors[selected], np.where(labels[selected] == 1, 1.0, -1.0)
        if len(y) == 0 or np.all(y == y[0]):
            bias[bin_index] = 1.0 if len(y) and y[0] > 0 else -1.0
            degenerate[bin_index] = True
            continue

        train_idx, val_idx = _split(len(y), validation_fraction, np.random.default_rng([seed, bin_index]))
        if len(val_idx) == 0 or len(np.unique(y[train_idx])) < 2:
            train_idx, val_idx = np.arange(len(y)), np.arange(len(y))

        best_c, best_accuracy = c_grid[0], -1.0
        for c in c_grid:
            model = fit_linear_svm(x[train_idx], y[train_idx], c, epochs)
            predicted = np.where(x[val_idx] @ model.weight + model.bias >= 0.0, 1.0, -1.0)
            accuracy = float(np.mean(predicted == y[val_idx]))
            if accuracy > best_accuracy:
                best_c, best_accuracy = c, accuracy

        final = fit_linear_svm(x, y, best_c, epochs)
        weights[bin_index], bias[bin_index], c_values[bin_index] = final.weight, final.bias, best_c
        logger.debug(f"SVM bin {bin_index}: C={best_c} validation accuracy={best_accuracy:.3f} n={len(y)}")

    logger.info(f"Trained {n_bins} per-bin SVMs ({sum(degenerate)} degenerate bins)")
    return SvmModel(weights, bias, c_values, degenerate)


def svm_predict(model, descriptor, bin_index):
    return int(model.decision(descriptor, [bin_index])[0] >= 0.0)


def svm_predict_batch(model, descriptors, bins):
    return (model.decision(descriptors, bins) >= 0.0).astype(np.int64)


def save_svm(path, model):
    c_values = np.array([c if c is not None else 0.0 for c in model.c_values])
    write_container(path, SVM_KIND, {'n_bins': config.NUM_ANGLE_BINS, 'degenerate': list(model.degenerate)},
                    {'weights': model.weights, 'bias': model.bias, 'c_values': c_values})


def load_svm(path):
    descriptor, arrays = read_container(path, kind=SVM_KIND)
    degenerate = descriptor['architecture']['degenerate']
    c_values = [None if flag else float(c) for c, flag in zip(arrays['c_values'], degenerate)]
    return SvmModel(arrays['weights'], arrays['bias'], c_values, degenerate)
