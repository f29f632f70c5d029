"""Rasterizes scenes into a grayscale camera image and an occupancy grid"""

import math

import numpy as np
import shapely

import config


def rasterize_placement(placement, workspace):
    """
    Pixel mask of one placement, restricted to its bounding box

    Returns:
        (row_slice, col_slice, mask) with mask true where the pixel center lies inside the polygon
    """
    rows, cols = workspace.raster_shape
    ppm = workspace.px_per_mm
    min_x, min_y, max_x, max_y = placement.polygon.bounds
    col_lo = max(0, int(math.floor(min_x * ppm - 0.5)))
    col_hi = min(cols, int(math.ceil(max_x * ppm + 0.5)))
    row_lo = max(0, int(math.floor(min_y * ppm - 0.5)))
    row_hi = min(rows, int(math.ceil(max_y * ppm + 0.5)))
    if col_hi <= col_lo or row_hi <= row_lo:
        return slice(0, 0), slice(0, 0), np.zeros((0, 0), dtype=bool)

    xs = (np.arange(col_lo, col_hi) + 0.5) / ppm
    ys = (np.arange(row_lo, row_hi) + 0.5) / ppm
    grid_x, grid_y = np.meshgrid(xs, ys)
    mask = shapely.contains_xy(placement.polygon, grid_x, grid_y)
    return slice(row_lo, row_hi), slice(col_lo, col_hi), mask


def render(scene, background=config.BACKGROUND_LEVEL):
    """
    Render a scene as seen by the overhead camera

    Args:
        scene: Scene to draw
        background: Gray level of the empty table

    Returns:
        (image, occupancy): float64 raster in [0, 1] and boolean raster of equal shape
    """
    shape = scene.workspace.raster_shape
    image = np.full(shape, background, dtype=np.float64)
    occupancy = np.zeros(shape, dtype=bool)

    for placement in scene.placements:
        row_slice, col_slice, mask = rasterize_placement(placement, scene.workspace)
        image[row_slice, col_slice][mask] = placement.shape.shade
        occupancy[row_slice, col_slice] |= mask

    return image, occupancy
