"""Data types for the table-top grasp simulator"""

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from shapely.geometry import Polygon

import config
from errors import UnknownObjectError


def round_half_up(value):
    """Round to the nearest integer, halves away from zero (113 for 112.5)"""
    return int(math.floor(value + 0.5))


def rotation_matrix(angle_deg):
    angle = math.radians(angle_deg)
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Workspace:
    """Bounded table-top surface; pixel (r, c) is centered at ((c+0.5)/ppm, (r+0.5)/ppm) mm"""
    width_mm: float = config.WORKSPACE_WIDTH_MM
    height_mm: float = config.WORKSPACE_HEIGHT_MM
    px_per_mm: float = config.PX_PER_MM

    def __post_init__(self):
        if self.width_mm <= 0 or self.height_mm <= 0:
            raise ValueError(f"Workspace extent must be positive, got {self.width_mm}x{self.height_mm}")
        if self.px_per_mm <= 0:
            raise ValueError(f"px_per_mm must be positive, got {self.px_per_mm}")

    @property
    def raster_shape(self):
        """(rows, cols) of the rendered raster"""
        return (round_half_up(self.height_mm * self.px_per_mm),
                round_half_up(self.width_mm * self.px_per_mm))

    def pixel_of(self, x_mm, y_mm):
        """Pixel (row, col) containing a workspace point"""
        return (int(math.floor(y_mm * self.px_per_mm)), int(math.floor(x_mm * self.px_per_mm)))

    def pixel_center_mm(self, row, col):
        return ((col + 0.5) / self.px_per_mm, (row + 0.5) / self.px_per_mm)

    def contains(self, x_mm, y_mm):
        return 0.0 <= x_mm <= self.width_mm and 0.0 <= y_mm <= self.height_mm

    @cached_property
    def polygon(self):
        return Polygon([(0, 0), (self.width_mm, 0), (self.width_mm, self.height_mm), (0, self.height_mm)])


@dataclass(frozen=True)
class ObjectShape:
    """Rigid planar object; vertices in mm around its own origin, stored counterclockwise"""
    vertices: tuple
    friction_half_angle_deg: float = config.FRICTION_HALF_ANGLE_DEG
    shade: float = 0.4
    name: str = 'shape'
    family: str = 'custom'

    def __post_init__(self):
        vertices = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(vertices) < 3:
            raise ValueError(f"Shape {self.name}: needs at least 3 vertices, got {len(vertices)}")
        polygon = Polygon(vertices)
        if not polygon.exterior.is_simple or not polygon.is_valid:
            raise ValueError(f"Shape {self.name}: polygon is not simple")
        if polygon.area <= 0:
            raise ValueError(f"Shape {self.name}: polygon has zero area")
        if not 0 < self.friction_half_angle_deg < 90:
            raise ValueError(f"Shape {self.name}: friction half-angle must be in (0, 90)")
        if not 0.0 <= self.shade <= 1.0:
            raise ValueError(f"Shape {self.name}: shade must be in [0, 1]")
        if not polygon.exterior.is_ccw:
            vertices = vertices[::-1]
        object.__setattr__(self, 'vertices', vertices)

    @cached_property
    def vertex_array(self):
        return np.array(self.vertices, dtype=np.float64)

    @property
    def fingerprint(self):
        """Geometry identity used to check library disjointness"""
        return tuple((round(x, 6), round(y, 6)) for x, y in self.vertices)


@dataclass(frozen=True)
class Placement:
    """An object instance posed on the workspace"""
    object_id: int
    shape: ObjectShape
    x_mm: float
    y_mm: float
    rotation_deg: float

    @cached_property
    def world_vertices(self):
        """(n, 2) counterclockwise polygon in workspace mm"""
        local = self.shape.vertex_array
        return local @ rotation_matrix(self.rotation_deg).T + np.array([self.x_mm, self.y_mm])

    @cached_property
    def polygon(self):
        return Polygon(self.world_vertices)


@dataclass(frozen=True)
class Scene:
    """Immutable set of placed objects on a workspace"""
    workspace: Workspace
    placements: tuple = ()
    rng_seed: int = 0

    @property
    def object_ids(self):
        return [placement.object_id for placement in self.placements]

    def __len__(self):
        return len(self.placements)

    def get(self, object_id):
        for placement in self.placements:
            if placement.object_id == object_id:
                return placement
        raise UnknownObjectError(f"Object {object_id} not in scene")


@dataclass(frozen=True)
class GraspConfig:
    """Planar grasp: point on the table plus closing-axis angle, counterclockwise from +x"""
    x_mm: float
    y_mm: float
    theta_deg: float

    def __post_init__(self):
        object.__setattr__(self, 'theta_deg', float(self.theta_deg) % 180.0)

    @property
    def axis(self):
        angle = math.radians(self.theta_deg)
        return np.array([math.cos(angle), math.sin(angle)])


@dataclass(frozen=True)
class GripperSpec:
    """Parallel-jaw gripper geometry in mm"""
    max_open_mm: float = config.GRIPPER_MAX_OPEN_MM
    min_close_mm: float = config.GRIPPER_MIN_CLOSE_MM
    jaw_footprint_mm: tuple = (config.JAW_LENGTH_MM, config.JAW_THICKNESS_MM)

    def __post_init__(self):
        if not self.max_open_mm > self.min_close_mm > 0:
            raise ValueError(f"Gripper needs max_open > min_close > 0, got {self.max_open_mm}/{self.min_close_mm}")

    @property
    def jaw_length_mm(self):
        return self.jaw_footprint_mm[0]

    @property
    def jaw_thickness_mm(self):
        return self.jaw_footprint_mm[1]


class FailureReason(str, enum.Enum):
    NO_CONTACT = 'no_contact'
    WIDTH_EXCEEDS_MAX = 'width_exceeds_max'
    WIDTH_BELOW_MIN = 'width_below_min'
    ANTIPODAL_VIOLATION = 'antipodal_violation'
    JAW_COLLISION = 'jaw_collision'


@dataclass(frozen=True)
class GraspOutcome:
    """Oracle verdict; contact_angles_deg are the normal-to-axis angles at the minus and plus contacts"""
    success: bool
    contact_width_mm: float = None
    failure_reason: FailureReason = None
    object_id: int = None
    contacts: tuple = field(default=(), compare=False)
    contact_angles_deg: tuple = field(default=(), compare=False)
