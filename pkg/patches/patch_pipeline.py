"""
Grasp patch pipeline
Cuts grasp-centered patches at 1.5x the gripper opening, resizes them to the
network input, quantizes grasp angles into 18 bins and rotates patches for
augmentation.
"""

import logging
import math
from dataclasses import dataclass

import cv2
import numpy as np

import config
from errors import BinOutOfRangeError, CenterOutsideImageError
from simulator.models import round_half_up

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AngleBin:
    """Bin j covers [10j, 10j + 10) degrees"""
    index: int

    def __post_init__(self):
        if not 0 <= self.index < config.NUM_ANGLE_BINS:
            raise BinOutOfRangeError(f"Angle bin {self.index} outside [0, {config.NUM_ANGLE_BINS})")

    @property
    def center_deg(self):
        return self.index * config.BIN_WIDTH_DEG + config.BIN_WIDTH_DEG / 2.0


@dataclass(frozen=True)
class Patch:
    pixels: np.ndarray
    center_mm: tuple
    source_scale_px: int


@dataclass(frozen=True)
class TrainingSample:
    patch: Patch
    bin: AngleBin
    label: int


@dataclass(frozen=True)
class ContextSample:
    """A grasp patch kept at source resolution with room to rotate"""
    context: np.ndarray
    crop_side: int
    theta_deg: float
    label: int
    center_mm: tuple = (0.0, 0.0)


def bin_angle(theta_deg):
    """Index of the 10-degree bin containing theta (reduced mod 180)"""
    theta = float(theta_deg) % 180.0
    index = int(math.floor(theta / config.BIN_WIDTH_DEG)) % config.NUM_ANGLE_BINS
    return AngleBin(index)


def crop_side_px(gripper, workspace, scale=config.PATCH_SCALE):
    """Source crop side: `scale` times the gripper opening, in pixels"""
    return round_half_up(scale * gripper.max_open_mm * workspace.px_per_mm)


def context_side_px(crop_side):
    """Smallest side >= sqrt(2) * crop_side with the crop centered on whole pixels"""
    margin = int(math.ceil(crop_side * (math.sqrt(2.0) - 1.0) / 2.0))
    return crop_side + 2 * margin


def window_origin(center_px, side):
    return int(math.floor(center_px - side / 2.0 + 0.5))


def cut_window(image, top, left, side, fill):
    """side x side window at (top, left); pixels outside the image take `fill`"""
    window = np.full((side, side), fill, dtype=np.float64)
    rows, cols = image.shape
    r0, r1 = max(top, 0), min(top + side, rows)
    c0, c1 = max(left, 0), min(left + side, cols)
    if r1 > r0 and c1 > c0:
        window[r0 - top:r1 - top, c0 - left:c1 - left] = image[r0:r1, c0:c1]
    return window


def resize(pixels, side):
    """Bilinear resize with half-pixel centers"""
    if pixels.shape == (side, side):
        return pixels.astype(np.float64, copy=True)
    return cv2.resize(np.asarray(pixels, dtype=np.float64), (side, side), interpolation=cv2.INTER_LINEAR)


def rotate(pixels, angle_deg, fill):
    """Rotate content counterclockwise by angle_deg in the (x=col, y=row) frame about the array center"""
    if angle_deg % 360.0 == 0.0:
        return np.asarray(pixels, dtype=np.float64).copy()
    rows, cols = pixels.shape
    cx, cy = (cols - 1) / 2.0, (rows - 1) / 2.0
    angle = math.radians(angle_deg)
    c, s = math.cos(angle), math.sin(angle)
    matrix = np.array([[c, -s, cx - c * cx + s * cy],
                       [s, c, cy - s * cx - c * cy]])
    return cv2.warpAffine(np.asarray(pixels, dtype=np.float64), matrix, (cols, rows),
                          flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=float(fill))


def _grasp_center_px(image, grasp, workspace):
    rows, cols = image.shape
    cx, cy = grasp.x_mm * workspace.px_per_mm, grasp.y_mm * workspace.px_per_mm
    if not (0.0 <= cx < cols and 0.0 <= cy < rows):
        raise CenterOutsideImageError(f"Grasp center ({grasp.x_mm:.1f}, {grasp.y_mm:.1f}) mm is outside the image")
    return cy, cx


def extract_patch(image, grasp, gripper, workspace, input_side=config.PATCH_INPUT_SIDE,
                  background=config.BACKGROUND_LEVEL):
    """
    Cut and resize the patch the network sees for a grasp

    Args:
        image: Rendered scene raster
        grasp: GraspConfig at the patch center
        gripper: GripperSpec (patch side follows its maximum opening)
        workspace: Workspace giving the pixel scale
        input_side: Network input side after resizing
        background: Fill for the part of the crop outside the image

    Returns:
        Patch
    """
    cy, cx = _grasp_center_px(image, grasp, workspace)
    side = crop_side_px(gripper, workspace)
    window = cut_window(image, window_origin(cy, side), window_origin(cx, side), side, background)
    return Patch(pixels=resize(window, input_side), center_mm=(grasp.x_mm, grasp.y_mm), source_scale_px=side)


def extract_context(image, grasp, gripper, workspace, background=config.BACKGROUND_LEVEL):
    """Source-resolution crop large enough to rotate without exposing unsupported pixels"""
    cy, cx = _grasp_center_px(image, grasp, workspace)
    side = context_side_px(crop_side_px(gripper, workspace))
    return cut_window(image, window_origin(cy, side), window_origin(cx, side), side, background)


def patch_from_context(context, crop_side, input_side=config.PATCH_INPUT_SIDE, rotation_deg=0.0,
                       background=config.BACKGROUND_LEVEL):
    """Rotate a context crop, re-crop the central crop_side window and resize it"""
    rotated = rotate(context, rotation_deg, background)
    offset = (context.shape[0] - crop_side) // 2
    crop = rotated[offset:offset + crop_side, offset:offset + crop_side]
    return resize(crop, input_side)


def draw_rotations(count, rng, bin_aligned=config.AUGMENT_BIN_ALIGNED):
    if bin_aligned:
        return [float(k) * config.BIN_WIDTH_DEG for k in rng.integers(0, config.NUM_ANGLE_BINS, size=count)]
    return [float(a) for a in rng.uniform(0.0, 180.0, size=count)]


def augment(sample, theta_rand=None, count=config.AUGMENT_COPIES, rng=None,
            input_side=config.PATCH_INPUT_SIDE, bin_aligned=config.AUGMENT_BIN_ALIGNED,
            background=config.BACKGROUND_LEVEL):
    """
    Rotation augmentation: rotate the patch by theta_rand and relabel the grasp angle as theta + theta_rand

    Args:
        sample: ContextSample
        theta_rand: Fixed rotation in degrees; when None, `count` rotations are drawn from rng
        count: Number of rotated copies to draw
        rng: numpy Generator used when theta_rand is None

    Returns:
        List of TrainingSample, label unchanged
    """
    rotations = [float(theta_rand)] if theta_rand is not None else draw_rotations(count, rng, bin_aligned)
    samples = []
    for rotation in rotations:
        pixels = patch_from_context(sample.context, sample.crop_side, input_side, rotation, background)
        patch = Patch(pixels=pixels, center_mm=sample.center_mm, source_scale_px=sample.crop_side)
        samples.append(TrainingSample(patch=patch, bin=bin_angle(sample.theta_deg + rotation), label=int(sample.label)))
    return samples
