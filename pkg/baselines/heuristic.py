"""
Common-sense grasp heuristic
Segment the object under the patch center, take the principal axes of its
pixel covariance and grasp across the smallest width; objects whose largest
extent is below the gripper's closing width are vetoed.
"""

import logging
import math
from dataclasses import dataclass

import cv2
import numpy as np

import config

logger = logging.getLogger(__name__)

FOREGROUND_TOLERANCE = 0.02
ISOTROPY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class HeuristicParams:
    angle_error_threshold_deg: float = config.HEURISTIC_DEFAULT_THRESHOLD_DEG
    eigenvalue_limit: float = 0.0  # pixels of extent, or squared pixels with raw_eigenvalue
    raw_eigenvalue: bool = False

    def __post_init__(self):
        if self.angle_error_threshold_deg <= 0:
            raise ValueError(f"Angle error threshold must be > 0, got {self.angle_error_threshold_deg}")


@dataclass(frozen=True)
class HeuristicFeatures:
    """Per-patch quantities the decision rule needs; valid is False when no foreground sits at the center"""
    valid: bool
    angle_deg: float = 0.0
    lambda_small: float = 0.0
    lambda_large: float = 0.0

    @property
    def extent_px(self):
        return 2.0 * math.sqrt(max(self.lambda_large, 0.0))


def default_params(gripper, patch_px_per_mm, threshold_deg=config.HEURISTIC_DEFAULT_THRESHOLD_DEG):
    """Eigenvalue limit at the gripper's minimum width mapped into patch pixels"""
    return HeuristicParams(threshold_deg, gripper.min_close_mm * patch_px_per_mm)


def eig_sym2(a, b, c):
    """
    Closed-form eigen decomposition of [[a, b], [b, c]]

    Returns:
        (lambda_small, lambda_large, v_small, v_large) with unit eigenvectors;
        the isotropic case returns the x and y axes
    """
    mean = (a + c) / 2.0
    radius = math.hypot((a - c) / 2.0, b)
    lambda_small, lambda_large = mean - radius, mean + radius
    if radius <= ISOTROPY_TOLERANCE * max(1.0, abs(mean)):
        return lambda_small, lambda_large, np.array([1.0, 0.0]), np.array([0.0, 1.0])

    def vector(value):
        first, second = np.array([b, value - a]), np.array([value - c, b])
        v = first if np.linalg.norm(first) >= np.linalg.norm(second) else second
        return v / np.linalg.norm(v)

    return lambda_small, lambda_large, vector(lambda_small), vector(lambda_large)


def center_component(pixels, background=config.BACKGROUND_LEVEL, tolerance=FOREGROUND_TOLERANCE):
    """
    Foreground mask of the connected component under the patch center

    The center is the middle pixel (or the central 2x2 block for even sides);
    returns None if none of those pixels is foreground.
    """
    foreground = np.abs(np.asarray(pixels, dtype=np.float64) - background) > tolerance
    _, labels = cv2.connectedComponents(foreground.astype(np.uint8), connectivity=8)
    rows, cols = foreground.shape
    row_candidates = [rows // 2] if rows % 2 else [rows // 2 - 1, rows // 2]
    col_candidates = [cols // 2] if cols % 2 else [cols // 2 - 1, cols // 2]
    for row in row_candidates:
        for col in col_candidates:
            if labels[row, col] > 0:
                return labels == labels[row, col]
    return None


def heuristic_features(pixels, background=config.BACKGROUND_LEVEL, tolerance=FOREGROUND_TOLERANCE):
    mask = center_component(pixels, background, tolerance)
    if mask is None:
        return HeuristicFeatures(valid=False)
    rows, cols = np.nonzero(mask)
    xs, ys = cols.astype(np.float64), rows.astype(np.float64)
    dx, dy = xs - xs.mean(), ys - ys.mean()
    a, b, c = float(np.mean(dx * dx)), float(np.mean(dx * dy)), float(np.mean(dy * dy))
    lambda_small, lambda_large, v_small, _ = eig_sym2(a, b, c)
    angle = math.degrees(math.atan2(v_small[1], v_small[0])) % 180.0
    return HeuristicFeatures(True, angle, lambda_small, lambda_large)


def angle_error(theta_deg, heuristic_deg):
    """Axis distance in degrees, folded into [0, 90]"""
    diff = abs(theta_deg - heuristic_deg) % 180.0
    return min(diff, 180.0 - diff)


def decide(features, theta_deg, params):
    if not features.valid:
        return False
    if angle_error(theta_deg, features.angle_deg) > params.angle_error_threshold_deg:
        return False
    size = features.lambda_large if params.raw_eigenvalue else features.extent_px
    return size >= params.eigenvalue_limit


def heuristic_predict(pixels, theta_deg, params, background=config.BACKGROUND_LEVEL,
                      tolerance=FOREGROUND_TOLERANCE):
    """
    Predict grasp success from the patch appearance alone

    Args:
        pixels: Patch raster (non-background pixels are foreground)
        theta_deg: Executed closing-axis angle
        params: HeuristicParams; eigenvalue_limit is in the patch's pixels

    Returns:
        bool; False when no foreground lies at the center
    """
    return decide(heuristic_features(pixels, background, tolerance), theta_deg, params)


def optimistic_param_select(features, thetas, labels, thresholds=config.HEURISTIC_THRESHOLD_GRID,
                            limits=config.HEURISTIC_LIMIT_GRID_PX, raw_eigenvalue=False):
    """
    Exhaustive grid search maximizing accuracy on the evaluation set itself

    Args:
        features: HeuristicFeatures per record
        thetas: Executed angles per record
        labels: Outcomes per record

    Returns:
        (best HeuristicParams, best accuracy); the first grid point wins ties
    """
    if not thresholds or not limits:
        raise ValueError("Heuristic parameter grids must be non-empty")
    labels = np.asarray(labels, dtype=bool)
    best, best_accuracy = None, -1.0
    for threshold in thresholds:
        for limit in limits:
            params = HeuristicParams(threshold, limit, raw_eigenvalue)
            predicted = np.array([decide(f, t, params) for f, t in zip(features, thetas)], dtype=bool)
            accuracy = float(np.mean(predicted == labels)) if len(labels) else 0.0
            if accuracy > best_accuracy:
                best, best_accuracy = params, accuracy
    logger.info(f"Optimistic heuristic: threshold={best.angle_error_threshold_deg} "
                f"limit={best.eigenvalue_limit} accuracy={best_accuracy:.3f}")
    return best, best_accuracy
