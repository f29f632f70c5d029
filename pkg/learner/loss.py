"""
Masked batch loss
Each sample contributes the binary softmax cross-entropy of the head for its
trial angle bin; the other 17 heads contribute exactly zero.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

import config
from errors import BinOutOfRangeError


@dataclass(frozen=True)
class LossReport:
    total: float
    contributions: np.ndarray

    @property
    def mean(self):
        return self.total / len(self.contributions) if len(self.contributions) else 0.0


def _check_bins(bins):
    bins = np.asarray(bins, dtype=np.int64)
    if bins.size and (bins.min() < 0 or bins.max() >= config.NUM_ANGLE_BINS):
        raise BinOutOfRangeError(f"Angle bins must lie in [0, {config.NUM_ANGLE_BINS}), got {bins.min()}..{bins.max()}")
    return bins


def masked_cross_entropy(logits, bins, labels):
    """
    Args:
        logits: (N, 18, 2)
        bins: (N,) trial angle bins
        labels: (N,) 0/1 outcomes

    Returns:
        (LossReport, dlogits) where dlogits is the gradient of the summed loss
    """
    bins = _check_bins(bins)
    labels = np.asarray(labels, dtype=np.int64)
    if len(bins) != len(labels) or len(bins) != len(logits):
        raise ValueError(f"Batch length mismatch: {len(logits)} logits, {len(bins)} bins, {len(labels)} labels")
    rows = np.arange(len(bins))
    selected = logits[rows, bins]
    contributions = logsumexp(selected, axis=1) - selected[rows, labels]

    dlogits = np.zeros_like(logits)
    dselected = softmax(selected, axis=1)
    dselected[rows, labels] -= 1.0
    dlogits[rows, bins] = dselected
    return LossReport(total=float(contributions.sum()), contributions=contributions), dlogits


def loss(activations, targets):
    """
    Batch loss over ActivationMatrix objects

    Args:
        activations: list of ActivationMatrix
        targets: list of (bin index, label)
    """
    if len(activations) != len(targets):
        raise ValueError(f"{len(activations)} activations for {len(targets)} targets")
    if not activations:
        return LossReport(total=0.0, contributions=np.zeros(0))
    logits = np.stack([activation.logits for activation in activations])
    bins = [int(bin_index) for bin_index, _ in targets]
    labels = [int(label) for _, label in targets]
    report, _ = masked_cross_entropy(logits, bins, labels)
    return report
