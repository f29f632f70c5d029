"""
Procedural object library
Stands in for the physical training and test objects. Each family draws its
dimensions from a seeded range; the library is split into seen, novel and
test subsets so held-out evaluation never touches training geometry.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from shapely.geometry import Polygon

import config
from errors import DisjointnessError
from simulator.models import ObjectShape

logger = logging.getLogger(__name__)


def _ellipse(a, b, n=24):
    angles = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return [(a * math.cos(t), b * math.sin(t)) for t in angles]


def _regular(n, radius):
    angles = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return [(radius * math.cos(t), radius * math.sin(t)) for t in angles]


def make_rectangle(rng):
    w, h = rng.uniform(30.0, 72.0), rng.uniform(45.0, 140.0)
    return [(0, 0), (w, 0), (w, h), (0, h)]


def make_chamfered_box(rng):
    w, h = rng.uniform(40.0, 75.0), rng.uniform(50.0, 110.0)
    c = rng.uniform(4.0, 0.3 * min(w, h))
    return [(c, 0), (w - c, 0), (w, c), (w, h - c), (w - c, h), (c, h), (0, h - c), (0, c)]


def make_ellipse(rng):
    return _ellipse(rng.uniform(15.0, 40.0), rng.uniform(20.0, 60.0))


def make_regular_polygon(rng):
    n = int(rng.choice([3, 4, 5, 6, 8, 32]))
    return _regular(n, rng.uniform(15.0, 45.0))


def make_triangle(rng):
    base, height = rng.uniform(40.0, 100.0), rng.uniform(35.0, 90.0)
    apex = rng.uniform(0.2, 0.8) * base
    return [(0, 0), (base, 0), (apex, height)]


def make_l_shape(rng):
    long_arm, short_arm = rng.uniform(70.0, 130.0), rng.uniform(55.0, 90.0)
    t = rng.uniform(20.0, 50.0)
    return [(0, 0), (long_arm, 0), (long_arm, t), (t, t), (t, short_arm), (0, short_arm)]


def make_t_shape(rng):
    bar, stem = rng.uniform(70.0, 130.0), rng.uniform(50.0, 100.0)
    t = rng.uniform(20.0, 45.0)
    half = bar / 2.0
    return [(-half, stem), (-half, stem + t), (half, stem + t), (half, stem),
            (t / 2.0, stem), (t / 2.0, 0), (-t / 2.0, 0), (-t / 2.0, stem)]


def make_trapezoid(rng):
    bottom, top, h = rng.uniform(45.0, 90.0), rng.uniform(25.0, 60.0), rng.uniform(35.0, 80.0)
    shift = (bottom - top) / 2.0
    return [(0, 0), (bottom, 0), (bottom - shift, h), (shift, h)]


SHAPE_FAMILIES = {
    'rectangle': make_rectangle,
    'chamfered_box': make_chamfered_box,
    'ellipse': make_ellipse,
    'regular_polygon': make_regular_polygon,
    'triangle': make_triangle,
    'l_shape': make_l_shape,
    't_shape': make_t_shape,
    'trapezoid': make_trapezoid,
}
FAMILY_NAMES = tuple(SHAPE_FAMILIES)


def centered(vertices):
    """Translate a vertex list so the polygon centroid sits at the origin"""
    centroid = Polygon(vertices).centroid
    return [(x - centroid.x, y - centroid.y) for x, y in vertices]


def make_shape(family, rng, name=None):
    vertices = centered(SHAPE_FAMILIES[family](rng))
    return ObjectShape(
        vertices=tuple(vertices),
        friction_half_angle_deg=config.FRICTION_HALF_ANGLE_DEG,
        shade=float(rng.uniform(0.15, 0.65)),
        name=name or family,
        family=family,
    )


def make_shape_library(seed=config.LIBRARY_SEED, per_family=config.SHAPES_PER_FAMILY, families=FAMILY_NAMES):
    """
    Generate a deterministic object library

    Returns:
        List of ObjectShape named '<family>-<index>'
    """
    rng = np.random.default_rng(seed)
    library = []
    for family in families:
        for index in range(per_family):
            library.append(make_shape(family, rng, name=f"{family}-{index:03d}"))
    logger.info(f"Generated shape library: {len(library)} shapes in {len(families)} families")
    return library


@dataclass(frozen=True)
class LibrarySplit:
    seen: tuple
    novel: tuple
    test: tuple


def split_library(library, novel_fraction=config.NOVEL_FRACTION_OF_LIBRARY,
                  test_fraction=config.TEST_FRACTION_OF_LIBRARY, seed=config.LIBRARY_SEED):
    """
    Partition a library per family into seen / novel / test subsets

    Every family is represented in every subset when it has at least three members.
    """
    rng = np.random.default_rng(seed + 1)
    by_family = {}
    for shape in library:
        by_family.setdefault(shape.family, []).append(shape)

    seen, novel, test = [], [], []
    for family in sorted(by_family):
        members = by_family[family]
        order = rng.permutation(len(members))
        n_test = int(round(len(members) * test_fraction))
        n_novel = int(round(len(members) * novel_fraction))
        if len(members) >= 3:
            n_test, n_novel = max(1, n_test), max(1, n_novel)
        test.extend(members[i] for i in order[:n_test])
        novel.extend(members[i] for i in order[n_test:n_test + n_novel])
        seen.extend(members[i] for i in order[n_test + n_novel:])

    split = LibrarySplit(seen=tuple(seen), novel=tuple(novel), test=tuple(test))
    check_disjoint(split.test, list(split.seen) + list(split.novel))
    return split


def check_disjoint(held_out, training):
    """Raise DisjointnessError if any held-out shape also appears in training"""
    training_names = {shape.name for shape in training}
    training_prints = {shape.fingerprint for shape in training}
    for shape in held_out:
        if shape.name in training_names or shape.fingerprint in training_prints:
            raise DisjointnessError(f"Held-out shape {shape.name} also appears in the training library")
