"""
Scene and raster file formats

Scenes are line-oriented text:
    workspace W H PPM
    obj <id> <shade> <friction> <x> <y> <rot> <n> <v1x> <v1y> ...
Several scenes share a file by prefixing each with `scene <scene_id> <seed>`.
Rasters are 8-bit binary PGM (P5), written and read with OpenCV.
"""

import logging
from pathlib import Path

import cv2
import numpy as np

from simulator.models import ObjectShape, Placement, Scene, Workspace

logger = logging.getLogger(__name__)


def _num(value):
    return repr(float(value))


def scene_lines(scene):
    ws = scene.workspace
    lines = [f"workspace {_num(ws.width_mm)} {_num(ws.height_mm)} {_num(ws.px_per_mm)}"]
    for p in scene.placements:
        coords = ' '.join(f"{_num(x)} {_num(y)}" for x, y in p.shape.vertices)
        lines.append(
            f"obj {p.object_id} {_num(p.shape.shade)} {_num(p.shape.friction_half_angle_deg)} "
            f"{_num(p.x_mm)} {_num(p.y_mm)} {_num(p.rotation_deg)} {len(p.shape.vertices)} {coords}")
    return lines


def dumps_scene(scene):
    return '\n'.join(scene_lines(scene)) + '\n'


def loads_scene(text, rng_seed=0):
    """Parse one scene block"""
    workspace = None
    placements = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == 'workspace':
            workspace = Workspace(float(parts[1]), float(parts[2]), float(parts[3]))
        elif parts[0] == 'obj':
            object_id = int(parts[1])
            n = int(parts[7])
            values = [float(v) for v in parts[8:8 + 2 * n]]
            vertices = tuple(zip(values[0::2], values[1::2]))
            shape = ObjectShape(vertices=vertices, friction_half_angle_deg=float(parts[3]),
                                shade=float(parts[2]), name=f"obj-{object_id}")
            placements.append(Placement(object_id, shape, float(parts[4]), float(parts[5]), float(parts[6])))
        else:
            raise ValueError(f"Unknown scene line: {line!r}")
    if workspace is None:
        raise ValueError("Scene text has no workspace header")
    return Scene(workspace=workspace, placements=tuple(placements), rng_seed=rng_seed)


def write_scene_file(path, scenes):
    """Write {scene_id: Scene} to one text file, in the dict's order"""
    path = Path(path)
    with path.open('w', encoding='ascii') as handle:
        for scene_id, scene in scenes.items():
            handle.write(f"scene {scene_id} {scene.rng_seed}\n")
            handle.write(dumps_scene(scene))
    logger.info(f"Wrote {len(scenes)} scenes to {path}")


def read_scene_file(path):
    scenes = {}
    scene_id, seed, block = None, 0, []
    for line in Path(path).read_text(encoding='ascii').splitlines():
        if line.startswith('scene '):
            if scene_id is not None:
                scenes[scene_id] = loads_scene('\n'.join(block), seed)
            _, scene_id, seed = line.split()
            seed, block = int(seed), []
        else:
            block.append(line)
    if scene_id is not None:
        scenes[scene_id] = loads_scene('\n'.join(block), seed)
    return scenes


def to_uint8(pixels):
    return np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, pixels):
    """Write a [0, 1] float raster (or uint8 raster) as binary PGM"""
    data = pixels if pixels.dtype == np.uint8 else to_uint8(pixels)
    if not cv2.imwrite(str(path), np.ascontiguousarray(data)):
        raise OSError(f"Could not write image {path}")


def read_pgm(path):
    """Read an 8-bit grayscale raster; returns uint8 array"""
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None or data.dtype != np.uint8 or data.ndim != 2:
        raise ValueError(f"{path}: not an 8-bit grayscale image")
    return data
