"""
Region-of-interest and grasp sampling
Connected components of the occupancy grid stand in for background
subtraction; a random component is chosen and a grasp drawn inside it.
"""

from dataclasses import dataclass

import cv2
import numpy as np

from errors import EmptyWorkspaceError
from simulator.models import GraspConfig


@dataclass(frozen=True)
class RegionOfInterest:
    """Pixel bounding box [row_min, row_min + height) x [col_min, col_min + width)"""
    row_min: int
    col_min: int
    height: int
    width: int

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"ROI extent must be positive, got {self.height}x{self.width}")

    @property
    def center_px(self):
        return (self.row_min + (self.height - 1) / 2.0, self.col_min + (self.width - 1) / 2.0)

    @property
    def extent_px(self):
        return (self.height, self.width)

    def contains_pixel(self, row, col):
        return self.row_min <= row < self.row_min + self.height and self.col_min <= col < self.col_min + self.width


def occupied_components(occupancy):
    """Bounding boxes of 8-connected occupied components, in scan order"""
    count, _, stats, _ = cv2.connectedComponentsWithStats(occupancy.astype(np.uint8), connectivity=8)
    return [
        RegionOfInterest(row_min=int(stats[label, cv2.CC_STAT_TOP]), col_min=int(stats[label, cv2.CC_STAT_LEFT]),
                         height=int(stats[label, cv2.CC_STAT_HEIGHT]), width=int(stats[label, cv2.CC_STAT_WIDTH]))
        for label in range(1, count)
    ]


def sample_roi(occupancy, rng):
    """
    Pick one occupied component uniformly at random

    Raises:
        EmptyWorkspaceError: no occupied pixel
    """
    components = occupied_components(occupancy)
    if not components:
        raise EmptyWorkspaceError("Occupancy grid has no occupied pixel")
    return components[int(rng.integers(len(components)))]


def sample_grasp(roi, rng, workspace):
    """Uniform pixel of the ROI (at its mm center) and uniform angle in [0, 180)"""
    row = roi.row_min + int(rng.integers(roi.height))
    col = roi.col_min + int(rng.integers(roi.width))
    x_mm, y_mm = workspace.pixel_center_mm(row, col)
    return GraspConfig(x_mm, y_mm, float(rng.uniform(0.0, 180.0)))
