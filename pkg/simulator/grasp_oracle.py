"""
Geometric grasp oracle
Adjudicates a planar parallel-jaw grasp the way the robot's lift-and-check
annotation would: contact, width limits, antipodal contacts, jaw clearance.
"""

import logging
import math

import numpy as np
import shapely
from shapely.geometry import Polygon

import config
from simulator.models import FailureReason, GraspOutcome

logger = logging.getLogger(__name__)

PARALLEL_EPS = 1e-12
VERTEX_EPS = 1e-9
REENTRY_EPS = 1e-7
OVERLAP_EPS_MM2 = 1e-6


def line_crossings(origin, direction, vertices):
    """
    Intersections of the line origin + t * direction with polygon edges

    Returns:
        Arrays (t, edge_index, s) sorted by t, s being the position along the edge in [0, 1]
    """
    start = vertices
    edge = np.roll(vertices, -1, axis=0) - vertices
    denom = direction[0] * edge[:, 1] - direction[1] * edge[:, 0]
    offset = start - origin
    valid = np.abs(denom) > PARALLEL_EPS
    safe = np.where(valid, denom, 1.0)
    t = (offset[:, 0] * edge[:, 1] - offset[:, 1] * edge[:, 0]) / safe
    s = (offset[:, 0] * direction[1] - offset[:, 1] * direction[0]) / safe
    hit = valid & (s >= -VERTEX_EPS) & (s <= 1.0 + VERTEX_EPS)
    index = np.nonzero(hit)[0]
    order = np.argsort(t[index], kind='stable')
    index = index[order]
    return t[index], index, s[index]


def edge_normals(vertices):
    """Outward unit normals of a counterclockwise polygon's edges"""
    edge = np.roll(vertices, -1, axis=0) - vertices
    normals = np.stack([edge[:, 1], -edge[:, 0]], axis=1)
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def contact_normal(vertices, edge_index, s):
    """Edge normal, or the bisector of both adjacent edge normals at a vertex"""
    normals = edge_normals(vertices)
    n = len(vertices)
    if s >= 1.0 - VERTEX_EPS:
        pair = normals[edge_index] + normals[(edge_index + 1) % n]
    elif s <= VERTEX_EPS:
        pair = normals[edge_index] + normals[(edge_index - 1) % n]
    else:
        return normals[edge_index]
    norm = np.linalg.norm(pair)
    return pair / norm if norm > PARALLEL_EPS else normals[edge_index]


def jaw_rectangle(center, axis, start, thickness, length):
    """Jaw footprint: `thickness` along the closing axis from `start`, `length` across it"""
    across = np.array([-axis[1], axis[0]]) * (length / 2.0)
    near = center + axis * start
    far = center + axis * (start + thickness)
    return Polygon([near - across, far - across, far + across, near + across])


def outer_halfplane(point, normal, size):
    """Square of side 2 * size lying on the outward side of the line through `point` normal to `normal`"""
    tangent = np.array([-normal[1], normal[0]]) * size
    far = normal * (2.0 * size)
    return Polygon([point - tangent, point + tangent, point + tangent + far, point - tangent + far])


def overlap_area(jaw, region):
    if region.is_empty or not jaw.intersects(region):
        return 0.0
    return jaw.intersection(region).area


def find_grasped(scene, x_mm, y_mm):
    """Placement whose interior contains the point, or None"""
    for placement in scene.placements:
        if shapely.contains_xy(placement.polygon, x_mm, y_mm):
            return placement
    return None


def grasp_oracle(scene, grasp, gripper, clearance_mm=config.JAW_CLEARANCE_MM):
    """
    Decide whether a grasp lifts an object

    Conditions are checked in order and the first violation is reported:
    contact (grasp point inside exactly one object), width within
    [min_close, max_open], antipodal contact normals inside each object's
    friction cone, and jaw footprints clear of every other object and of
    the grasped object itself. Grasped-object material under a jaw only
    counts when it lies beyond the line of the contact face.

    Args:
        scene: Scene to grasp in
        grasp: GraspConfig
        gripper: GripperSpec

    Returns:
        GraspOutcome
    """
    target = find_grasped(scene, grasp.x_mm, grasp.y_mm)
    if target is None:
        return GraspOutcome(success=False, failure_reason=FailureReason.NO_CONTACT)

    center = np.array([grasp.x_mm, grasp.y_mm])
    axis = grasp.axis
    vertices = target.world_vertices
    t, edges, s = line_crossings(center, axis, vertices)

    ahead = np.nonzero(t > 0)[0]
    behind = np.nonzero(t < 0)[0]
    if len(ahead) == 0 or len(behind) == 0:
        # numerically on the boundary
        return GraspOutcome(success=False, failure_reason=FailureReason.NO_CONTACT)
    plus, minus = ahead[0], behind[-1]
    t_plus, t_minus = float(t[plus]), float(t[minus])
    width = t_plus - t_minus
    contacts = (tuple(center + axis * t_minus), tuple(center + axis * t_plus))

    if width > gripper.max_open_mm:
        return GraspOutcome(False, width, FailureReason.WIDTH_EXCEEDS_MAX, target.object_id, contacts)
    if width < gripper.min_close_mm:
        return GraspOutcome(False, width, FailureReason.WIDTH_BELOW_MIN, target.object_id, contacts)

    cos_limit = math.cos(math.radians(target.shape.friction_half_angle_deg))
    normal_plus = contact_normal(vertices, edges[plus], s[plus])
    normal_minus = contact_normal(vertices, edges[minus], s[minus])
    cos_plus, cos_minus = float(normal_plus @ axis), float(-(normal_minus @ axis))
    angles = tuple(math.degrees(math.acos(min(1.0, max(-1.0, c)))) for c in (cos_minus, cos_plus))
    if cos_plus < cos_limit or cos_minus < cos_limit:
        return GraspOutcome(False, width, FailureReason.ANTIPODAL_VIOLATION, target.object_id, contacts, angles)

    thickness = gripper.jaw_thickness_mm
    reach = clearance_mm + thickness
    reenters = np.any((t > t_plus + REENTRY_EPS) & (t <= t_plus + reach)) or \
        np.any((t < t_minus - REENTRY_EPS) & (t >= t_minus - reach))
    if reenters:
        return GraspOutcome(False, width, FailureReason.JAW_COLLISION, target.object_id, contacts, angles)

    jaws = (
        jaw_rectangle(center, axis, t_plus + clearance_mm, thickness, gripper.jaw_length_mm),
        jaw_rectangle(center, -axis, -t_minus + clearance_mm, thickness, gripper.jaw_length_mm),
    )
    size = reach + gripper.jaw_length_mm
    beyond_faces = (
        outer_halfplane(np.array(contacts[1]), normal_plus, size),
        outer_halfplane(np.array(contacts[0]), normal_minus, size),
    )
    for jaw, beyond in zip(jaws, beyond_faces):
        if overlap_area(jaw, target.polygon.intersection(beyond)) > OVERLAP_EPS_MM2:
            return GraspOutcome(False, width, FailureReason.JAW_COLLISION, target.object_id, contacts, angles)
    for placement in scene.placements:
        if placement.object_id == target.object_id:
            continue
        for jaw in jaws:
            if overlap_area(jaw, placement.polygon) > OVERLAP_EPS_MM2:
                return GraspOutcome(False, width, FailureReason.JAW_COLLISION, target.object_id, contacts, angles)

    return GraspOutcome(True, width, None, target.object_id, contacts, angles)
