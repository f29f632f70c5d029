"""
Scene generation and editing for the table-top simulator
Objects are dropped by rejection sampling of random poses
"""

import logging
import math

import numpy as np

import config
from errors import PlacementError
from simulator.models import GraspConfig, Placement, Scene, rotation_matrix

logger = logging.getLogger(__name__)

OVERLAP_AREA_TOLERANCE = 1e-9


def overlaps(polygon, others):
    """True if polygon shares interior area with any of others (touching is fine)"""
    for other in others:
        if polygon.intersects(other) and polygon.intersection(other).area > OVERLAP_AREA_TOLERANCE:
            return True
    return False


def generate_scene(seed, n_objects, library, workspace, max_rejections=config.MAX_PLACEMENT_REJECTIONS):
    """
    Build a cluttered scene deterministically from a seed

    Args:
        seed: Integer seed; equal inputs give equal scenes
        n_objects: Number of objects to place (>= 1)
        library: Non-empty list of ObjectShape to draw from
        workspace: Workspace the objects must lie inside
        max_rejections: Pose attempts per object before giving up

    Returns:
        Scene with pairwise non-overlapping placements
    """
    if n_objects < 1:
        raise ValueError(f"n_objects must be >= 1, got {n_objects}")
    if not library:
        raise ValueError("Shape library is empty")

    rng = np.random.default_rng(seed)
    placements = []
    placed_polygons = []

    for object_id in range(n_objects):
        shape = library[int(rng.integers(len(library)))]
        placement = None

        for _ in range(max_rejections):
            rotation = float(rng.uniform(0.0, 360.0))
            local = shape.vertex_array @ rotation_matrix(rotation).T
            x_low, y_low = -local.min(axis=0)
            x_high = workspace.width_mm - local[:, 0].max()
            y_high = workspace.height_mm - local[:, 1].max()
            if x_high < x_low or y_high < y_low:
                continue
            x = float(rng.uniform(x_low, x_high))
            y = float(rng.uniform(y_low, y_high))
            candidate = Placement(object_id, shape, x, y, rotation)
            if overlaps(candidate.polygon, placed_polygons):
                continue
            placement = candidate
            break

        if placement is None:
            raise PlacementError(
                f"Scene seed {seed}: no free pose for object {object_id} ({shape.name}) "
                f"after {max_rejections} rejections")

        placements.append(placement)
        placed_polygons.append(placement.polygon)

    logger.debug(f"Generated scene seed={seed} with {len(placements)} objects")
    return Scene(workspace=workspace, placements=tuple(placements), rng_seed=seed)


def remove_object(scene, object_id):
    """Scene without the given object; other placements untouched"""
    scene.get(object_id)  # raises UnknownObjectError
    remaining = tuple(p for p in scene.placements if p.object_id != object_id)
    return Scene(workspace=scene.workspace, placements=remaining, rng_seed=scene.rng_seed)


def translate_scene(scene, dx_mm, dy_mm):
    placements = tuple(
        Placement(p.object_id, p.shape, p.x_mm + dx_mm, p.y_mm + dy_mm, p.rotation_deg)
        for p in scene.placements)
    return Scene(workspace=scene.workspace, placements=placements, rng_seed=scene.rng_seed)


def rotate_scene(scene, angle_deg, center_mm):
    """Rotate every placement counterclockwise by angle_deg about center_mm"""
    rotation = rotation_matrix(angle_deg)
    center = np.asarray(center_mm, dtype=np.float64)
    placements = []
    for p in scene.placements:
        x, y = rotation @ (np.array([p.x_mm, p.y_mm]) - center) + center
        placements.append(Placement(p.object_id, p.shape, float(x), float(y),
                                    (p.rotation_deg + angle_deg) % 360.0))
    return Scene(workspace=scene.workspace, placements=tuple(placements), rng_seed=scene.rng_seed)


def translate_grasp(grasp, dx_mm, dy_mm):
    return GraspConfig(grasp.x_mm + dx_mm, grasp.y_mm + dy_mm, grasp.theta_deg)


def rotate_grasp(grasp, angle_deg, center_mm):
    rotation = rotation_matrix(angle_deg)
    center = np.asarray(center_mm, dtype=np.float64)
    x, y = rotation @ (np.array([grasp.x_mm, grasp.y_mm]) - center) + center
    return GraspConfig(float(x), float(y), math.fmod(grasp.theta_deg + angle_deg, 180.0) % 180.0)


def scene_polygons(scene):
    return [p.polygon for p in scene.placements]


def inside_workspace(scene):
    """True if every object lies fully on the table"""
    table = scene.workspace.polygon
    return all(table.covers(polygon) for polygon in scene_polygons(scene))

