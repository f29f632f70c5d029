"""
Held-out accuracy and the method comparison table

A predictor maps a TestSet to one score per record for the executed angle
bin; the prediction is score >= threshold.
"""

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from baselines.heuristic import decide, heuristic_features
from baselines.hog import hog_batch
from baselines.knn import knn_predict_batch
from baselines.svm import svm_predict_batch
from evaluation.reports import format_table, write_table_csv
from simulator.grasp_oracle import grasp_oracle
from simulator.models import GripperSpec

logger = logging.getLogger(__name__)

REPORT_HEADER = ['method', 'accuracy', 'correct', 'total']


class Predictor(Protocol):
    def scores_for(self, test_set) -> np.ndarray:
        ...


class ScorerPredictor:
    """Wraps a scorer (patches, centers_mm) -> (N, 18), e.g. NetScorer"""

    def __init__(self, scorer):
        self.scorer = scorer

    def scores_for(self, test_set):
        if len(test_set) == 0:
            return np.zeros(0)
        scores = self.scorer(test_set.patches, test_set.centers_mm)
        return scores[np.arange(len(test_set)), test_set.bins]


class ConstantPredictor:
    def __init__(self, value=0.5):
        self.value = value

    def scores_for(self, test_set):
        return np.full(len(test_set), self.value)


class OraclePredictor:
    """Replays the simulator on the recorded scene snapshots"""

    def __init__(self, gripper=None):
        self.gripper = gripper or GripperSpec()

    def scores_for(self, test_set):
        return np.array([
            float(grasp_oracle(test_set.scenes[r.scene_id], r.grasp, self.gripper).success)
            for r in test_set.records
        ])


class HeuristicPredictor:
    def __init__(self, params, background):
        self.params = params
        self.background = background

    def scores_for(self, test_set):
        return np.array([
            float(decide(heuristic_features(pixels, self.background), theta, self.params))
            for pixels, theta in zip(test_set.patches, test_set.thetas)
        ])


class KnnPredictor:
    def __init__(self, model, k=None, hog_config=None):
        self.model = model
        self.k = k
        self.hog_config = hog_config

    def scores_for(self, test_set):
        descriptors = hog_batch(test_set.patches, self.hog_config)
        return knn_predict_batch(self.model, descriptors, test_set.bins, self.k).astype(np.float64)


class SvmPredictor:
    def __init__(self, model, hog_config=None):
        self.model = model
        self.hog_config = hog_config

    def scores_for(self, test_set):
        descriptors = hog_batch(test_set.patches, self.hog_config)
        return svm_predict_batch(self.model, descriptors, test_set.bins).astype(np.float64)


@dataclass(frozen=True)
class AccuracyEntry:
    method: str
    accuracy: float
    correct: int
    total: int

    def as_row(self):
        return [self.method, self.accuracy, self.correct, self.total]


@dataclass(frozen=True)
class AccuracyReport:
    entries: tuple

    def get(self, method):
        for entry in self.entries:
            if entry.method == method:
                return entry
        raise KeyError(method)

    def rows(self):
        return [entry.as_row() for entry in self.entries]

    def to_text(self):
        return format_table(REPORT_HEADER, self.rows())

    def write(self, csv_path, text_path=None):
        write_table_csv(csv_path, REPORT_HEADER, [[e.method, repr(e.accuracy), e.correct, e.total]
                                                  for e in self.entries])
        if text_path is not None:
            with open(text_path, 'w') as handle:
                handle.write(self.to_text())


def accuracy(predictor, test_set, threshold=0.5, method='model'):
    """
    Fraction of records whose thresholded score matches the executed outcome

    Returns:
        AccuracyEntry
    """
    total = len(test_set)
    if total == 0:
        return AccuracyEntry(method, 0.0, 0, 0)
    predicted = np.asarray(predictor.scores_for(test_set)) >= threshold
    correct = int(np.sum(predicted == (np.asarray(test_set.labels) == 1)))
    return AccuracyEntry(method, correct / total, correct, total)


def compare_all(methods, test_set, threshold=0.5):
    """
    Evaluate every method on the same test set

    Args:
        methods: Ordered {name: predictor}

    Returns:
        AccuracyReport with one row per method, in the given order
    """
    entries = []
    for name, predictor in methods.items():
        entry = accuracy(predictor, test_set, threshold, method=name)
        logger.info(f"{name}: accuracy {entry.accuracy:.3f} ({entry.correct}/{entry.total})")
        entries.append(entry)
    return AccuracyReport(tuple(entries))
