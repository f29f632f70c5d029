"""
Per-angle-bin k-nearest-neighbour classifier on HoG descriptors
Queries are compared only with training samples of the same angle bin.
Vote ties resolve to failure.
"""

import logging

import numpy as np
from scipy.spatial.distance import cdist

import config
from learner.checkpoint import read_container, write_container

logger = logging.getLogger(__name__)

KNN_KIND = 'knn'


class KnnModel:
    def __init__(self, stores, k=1):
        self.stores = stores  # bin -> (descriptors (n, D), labels (n,))
        self.k = int(k)

    @classmethod
    def fit(cls, descriptors, bins, labels, k=1):
        descriptors, bins, labels = np.asarray(descriptors), np.asarray(bins), np.asarray(labels, dtype=np.int64)
        stores = {}
        for bin_index in range(config.NUM_ANGLE_BINS):
            selected = bins == bin_index
            stores[bin_index] = (descriptors[selected], labels[selected])
        return cls(stores, k)

    def neighbour_labels(self, queries, bin_index, k):
        """Labels of the k nearest stored samples per query, nearest first (stable on distance ties)"""
        stored, stored_labels = self.stores.get(bin_index, (np.zeros((0, 0)), np.zeros(0, dtype=np.int64)))
        if len(stored_labels) == 0:
            return np.zeros((len(queries), 0), dtype=np.int64)
        distances = cdist(np.atleast_2d(queries), stored)
        order = np.argsort(distances, axis=1, kind='stable')[:, :k]
        return stored_labels[order]


def vote(neighbour_labels):
    positives = neighbour_labels.sum(axis=1)
    return (2 * positives > neighbour_labels.shape[1]).astype(np.int64)


def knn_predict(model, query, bin_index, k=None):
    """Majority label of the k nearest same-bin neighbours; empty bin -> 0"""
    return int(vote(model.neighbour_labels(np.atleast_2d(query), int(bin_index), k or model.k))[0])


def knn_predict_batch(model, queries, bins, k=None):
    queries, bins = np.asarray(queries), np.asarray(bins)
    predicted = np.zeros(len(bins), dtype=np.int64)
    for bin_index in np.unique(bins):
        selected = np.nonzero(bins == bin_index)[0]
        predicted[selected] = vote(model.neighbour_labels(queries[selected], int(bin_index), k or model.k))
    return predicted


def sweep_k(model, queries, bins, labels, k_grid=config.KNN_K_GRID):
    """
    Optimistic k selection on the evaluation set

    Returns:
        (best k, best accuracy, {k: accuracy}); the first k wins ties
    """
    labels = np.asarray(labels, dtype=np.int64)
    accuracies = {}
    for k in k_grid:
        accuracies[k] = float(np.mean(knn_predict_batch(model, queries, bins, k) == labels)) if len(labels) else 0.0
    best_k = max(k_grid, key=lambda k: (accuracies[k], -k_grid.index(k)))
    logger.info(f"kNN sweep: best k={best_k} accuracy={accuracies[best_k]:.3f}")
    return best_k, accuracies[best_k], accuracies


def save_knn(path, model):
    arrays = {}
    for bin_index in range(config.NUM_ANGLE_BINS):
        stored, stored_labels = model.stores.get(bin_index, (np.zeros((0, 0)), np.zeros(0)))
        arrays[f"bin{bin_index:02d}.descriptors"] = stored
        arrays[f"bin{bin_index:02d}.labels"] = stored_labels.astype(np.float64)
    write_container(path, KNN_KIND, {'k': model.k, 'n_bins': config.NUM_ANGLE_BINS}, arrays)


def load_knn(path):
    descriptor, arrays = read_container(path, kind=KNN_KIND)
    stores = {}
    for bin_index in range(config.NUM_ANGLE_BINS):
        stored = arrays[f"bin{bin_index:02d}.descriptors"]
        stores[bin_index] = (stored, arrays[f"bin{bin_index:02d}.labels"].astype(np.int64))
    return KnnModel(stores, descriptor['architecture']['k'])
