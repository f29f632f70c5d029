"""HoG descriptors of grasp patches (OpenCV, unsigned gradients, L2-Hys blocks)"""

from dataclasses import dataclass

import cv2
import numpy as np

import config
from errors import ShapeMismatchError


@dataclass(frozen=True)
class HogConfig:
    cell: int = config.HOG_CELL
    bins: int = config.HOG_BINS
    block_cells: int = 2

    def descriptor(self, side):
        if side % self.cell != 0:
            raise ShapeMismatchError(f"Patch side {side} is not divisible by HoG cell {self.cell}")
        block = self.cell * self.block_cells
        return cv2.HOGDescriptor((side, side), (block, block), (self.cell, self.cell),
                                 (self.cell, self.cell), self.bins)

    def length(self, side):
        blocks = side // self.cell - self.block_cells + 1
        return blocks * blocks * self.block_cells * self.block_cells * self.bins


def hog(pixels, hog_config=None):
    """Flattened descriptor of a square [0, 1] patch"""
    hog_config = hog_config or HogConfig()
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
        raise ShapeMismatchError(f"HoG expects a square patch, got {pixels.shape}")
    data = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
    return hog_config.descriptor(pixels.shape[0]).compute(data).ravel().astype(np.float64)


def hog_batch(patches, hog_config=None):
    """(N, S, S) or (N, 1, S, S) -> (N, D)"""
    patches = np.asarray(patches)
    if patches.ndim == 4:
        patches = patches[:, 0]
    hog_config = hog_config or HogConfig()
    if len(patches) == 0:
        return np.zeros((0, hog_config.length(patches.shape[-1])))
    descriptor = hog_config.descriptor(patches.shape[-1])
    data = np.clip(np.rint(patches * 255.0), 0, 255).astype(np.uint8)
    return np.stack([descriptor.compute(image).ravel() for image in data]).astype(np.float64)
