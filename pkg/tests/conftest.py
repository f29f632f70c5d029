import numpy as np
import pytest

from learner.network import Architecture
from patches.patch_pipeline import AngleBin
from simulator.grasp_oracle import grasp_oracle
from simulator.models import GraspConfig, GripperSpec, ObjectShape, Placement, Scene, Workspace
from simulator.shape_library import make_shape_library, split_library


def rectangle(width, height, name='rect'):
    half_w, half_h = width / 2.0, height / 2.0
    return ObjectShape(vertices=((-half_w, -half_h), (half_w, -half_h), (half_w, half_h), (-half_w, half_h)),
                       name=name)


def scene_of(workspace, *objects):
    """Scene from (shape, x, y, rotation) tuples, ids in order"""
    placements = tuple(Placement(index, shape, x, y, rotation) for index, (shape, x, y, rotation) in enumerate(objects))
    return Scene(workspace=workspace, placements=placements)


@pytest.fixture
def workspace():
    return Workspace(200.0, 200.0, 1.0)


@pytest.fixture
def small_workspace():
    """Coarse raster for tests that render many scenes"""
    return Workspace(300.0, 300.0, 0.5)


@pytest.fixture
def gripper():
    return GripperSpec()


@pytest.fixture
def library():
    return make_shape_library(seed=7, per_family=3)


@pytest.fixture
def split(library):
    return split_library(library, 0.34, 0.34, seed=7)


@pytest.fixture
def tiny_architecture():
    return Architecture(input_side=16, conv_channels=(2, 4), conv_kernel=3, fc_widths=(8, 8))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


class SimulatorScorer:
    """Scorer that executes every bin center in the current scene: 1.0 on success, `miss` otherwise"""

    def __init__(self, gripper=None, miss=0.0):
        self.gripper = gripper or GripperSpec()
        self.miss = miss
        self.scene = None

    def __call__(self, patches, centers):
        scores = np.full((len(centers), 18), self.miss)
        for i, (x, y) in enumerate(centers):
            for j in range(18):
                if grasp_oracle(self.scene, GraspConfig(float(x), float(y), AngleBin(j).center_deg), self.gripper).success:
                    scores[i, j] = 1.0
        return scores


class SceneAware:
    """Hands the scene being grasped to a SimulatorScorer before the wrapped policy proposes"""

    def __init__(self, policy, scorer):
        self.policy = policy
        self.scorer = scorer

    def propose(self, scene, image, occupancy, rng):
        self.scorer.scene = scene
        return self.policy.propose(scene, image, occupancy, rng)
