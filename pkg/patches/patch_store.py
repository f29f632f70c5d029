"""
Patch storage and training-set assembly

Context crops are quantized to 8 bits on the way in, so a dataset trained in
the collecting process and one reloaded from PGM files see identical pixels.
"""

import logging
from pathlib import Path

import numpy as np

import config
from patches.patch_pipeline import ContextSample, augment, bin_angle, patch_from_context
from simulator.scene_io import read_pgm, to_uint8, write_pgm

logger = logging.getLogger(__name__)


class PatchStore:
    """Keyed store of 8-bit context crops, optionally mirrored to PGM files under `root`"""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None
        self._cache = {}

    def put(self, key, pixels):
        data = to_uint8(pixels)
        self._cache[key] = data
        if self.root is not None:
            path = self.root / key
            path.parent.mkdir(parents=True, exist_ok=True)
            write_pgm(path, data)
        return key

    def get(self, key):
        if key not in self._cache:
            if self.root is None:
                raise KeyError(f"Patch {key} not in store")
            self._cache[key] = read_pgm(self.root / key)
        return self._cache[key]

    def get_float(self, key):
        return self.get(key).astype(np.float64) / 255.0

    def __contains__(self, key):
        return key in self._cache or (self.root is not None and (self.root / key).exists())

    def __len__(self):
        return len(self._cache)


class TrainingArrays:
    """Network-ready arrays: patches (N, 1, S, S) float32, bins (N,), labels (N,), weights (N,)"""

    def __init__(self, patches, bins, labels, weights, sources):
        self.patches = patches
        self.bins = bins
        self.labels = labels
        self.weights = weights
        self.sources = sources

    def __len__(self):
        return len(self.labels)

    @property
    def effective_size(self):
        return int(self.weights.sum())


def build_training_arrays(entries, store, crop_side, input_side=config.PATCH_INPUT_SIDE,
                          augment_copies=config.AUGMENT_COPIES, seed=0,
                          bin_aligned=config.AUGMENT_BIN_ALIGNED, background=config.BACKGROUND_LEVEL):
    """
    Assemble training arrays from (record, weight) entries

    Each record contributes its own patch followed by `augment_copies`
    rotated copies; every row inherits the record's replication weight.
    """
    rng = np.random.default_rng(seed)
    patches, bins, labels, weights, sources = [], [], [], [], []

    for index, (record, weight) in enumerate(entries):
        context = store.get_float(record.patch_path)
        patches.append(patch_from_context(context, crop_side, input_side, 0.0, background))
        bins.append(bin_angle(record.grasp.theta_deg).index)
        labels.append(int(record.label))
        weights.append(int(weight))
        sources.append(index)

        if augment_copies > 0:
            sample = ContextSample(context=context, crop_side=crop_side, theta_deg=record.grasp.theta_deg,
                                   label=int(record.label), center_mm=(record.grasp.x_mm, record.grasp.y_mm))
            for rotated in augment(sample, count=augment_copies, rng=rng, input_side=input_side,
                                   bin_aligned=bin_aligned, background=background):
                patches.append(rotated.patch.pixels)
                bins.append(rotated.bin.index)
                labels.append(rotated.label)
                weights.append(int(weight))
                sources.append(index)

    if patches:
        stacked = np.stack(patches).astype(np.float32)[:, None, :, :]
    else:
        stacked = np.zeros((0, 1, input_side, input_side), dtype=np.float32)
    logger.info(f"Built {len(labels)} training rows from {len(entries)} records ({augment_copies} rotated copies each)")
    return TrainingArrays(stacked, np.array(bins, dtype=np.int64), np.array(labels, dtype=np.int64),
                          np.array(weights, dtype=np.int64), np.array(sources, dtype=np.int64))
