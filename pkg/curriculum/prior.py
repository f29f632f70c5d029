"""
Graspability prior and importance sampling
The previous model scores a few hundred random patches of the current image
in every angle bin; the next grasp is drawn from that matrix.
"""

import logging
import threading
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

import config
from collector.roi import sample_grasp, sample_roi
from collector.trial_collector import Proposal
from patches.patch_pipeline import AngleBin, extract_patch
from simulator.models import GraspConfig, GripperSpec

logger = logging.getLogger(__name__)

IMPORTANCE_LAWS = ('proportional', 'softmax', 'rank')


class NetScorer:
    """Adapts a GraspNet to the scorer interface: (patches, centers_mm) -> (N, 18)"""

    def __init__(self, net):
        self.net = net

    def __call__(self, patches, centers_mm):
        x = np.asarray(patches, dtype=np.float64)
        if x.ndim == 3:
            x = x[:, None, :, :]
        return self.net.scores(x)


@dataclass(frozen=True)
class PriorMatrix:
    entries: np.ndarray  # (n_patches, 18)
    centers_mm: np.ndarray  # (n_patches, 2)
    patches: np.ndarray = None

    @property
    def shape(self):
        return self.entries.shape


def sample_centers(occupancy, rng, workspace, n_patches):
    """Patch centers drawn with the trial sampler: random component, uniform pixel"""
    centers = np.zeros((n_patches, 2))
    for index in range(n_patches):
        grasp = sample_grasp(sample_roi(occupancy, rng), rng, workspace)
        centers[index] = (grasp.x_mm, grasp.y_mm)
    return centers


def extract_batch(image, centers_mm, gripper, workspace, input_side=config.PATCH_INPUT_SIDE):
    if len(centers_mm) == 0:
        return np.zeros((0, input_side, input_side))
    return np.stack([
        extract_patch(image, GraspConfig(float(x), float(y), 0.0), gripper, workspace, input_side).pixels
        for x, y in centers_mm
    ])


def build_prior(scorer, image, occupancy, workspace, rng, n_patches=config.PRIOR_PATCHES, gripper=None,
                input_side=config.PATCH_INPUT_SIDE, keep_patches=False):
    """
    Score n_patches random patches of an image in all 18 bins

    Args:
        scorer: Callable (patches, centers_mm) -> (N, 18), e.g. NetScorer
        image, occupancy: Rendered scene
        workspace: Workspace of the scene
        rng: numpy Generator drawing the patch centers

    Returns:
        PriorMatrix

    Raises:
        EmptyWorkspaceError: nothing on the table
    """
    gripper = gripper or GripperSpec()
    centers = sample_centers(occupancy, rng, workspace, n_patches)
    patches = extract_batch(image, centers, gripper, workspace, input_side)
    entries = np.asarray(scorer(patches, centers), dtype=np.float64)
    return PriorMatrix(entries=entries, centers_mm=centers, patches=patches if keep_patches else None)


def cell_weights(entries, floor=config.IMPORTANCE_FLOOR, law=config.IMPORTANCE_LAW, temperature=1.0):
    """Unnormalized sampling weight of every (patch, bin) cell"""
    entries = np.asarray(entries, dtype=np.float64)
    if law == 'proportional':
        return np.maximum(entries, floor)
    if law == 'softmax':
        return softmax(entries.ravel() / temperature).reshape(entries.shape)
    if law == 'rank':
        ranks = np.empty(entries.size)
        ranks[np.argsort(entries.ravel(), kind='stable')] = np.arange(1, entries.size + 1)
        return ranks.reshape(entries.shape)
    raise ValueError(f"Unknown importance law {law!r}; expected one of {IMPORTANCE_LAWS}")


def importance_sample(prior, rng, floor=config.IMPORTANCE_FLOOR, law=config.IMPORTANCE_LAW, temperature=1.0):
    """
    Draw one (patch index, bin index) cell with probability proportional to its weight

    Returns:
        (i, j)
    """
    weights = cell_weights(prior.entries, floor, law, temperature).ravel()
    cumulative = np.cumsum(weights)
    if not cumulative[-1] > 0:
        raise ValueError("Prior matrix has no positive weight")
    flat = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
    flat = min(flat, len(weights) - 1)
    return divmod(flat, prior.entries.shape[1])


class ImportancePolicy:
    """
    Staged-collection policy: prior matrix per image, grasp drawn by importance sampling

    The executed angle is the center of the drawn bin. One prior is kept per
    rendered image and thread.
    """

    def __init__(self, scorer, gripper=None, n_patches=config.PRIOR_PATCHES, floor=config.IMPORTANCE_FLOOR,
                 law=config.IMPORTANCE_LAW, temperature=1.0, input_side=config.PATCH_INPUT_SIDE):
        self.scorer = scorer
        self.gripper = gripper or GripperSpec()
        self.n_patches = n_patches
        self.floor = floor
        self.law = law
        self.temperature = temperature
        self.input_side = input_side
        self._local = threading.local()

    def prior_for(self, scene, image, occupancy, rng):
        cached = getattr(self._local, 'cached', None)
        if cached is None or cached[0] is not image:
            prior = build_prior(self.scorer, image, occupancy, scene.workspace, rng, self.n_patches,
                                self.gripper, self.input_side)
            self._local.cached = (image, prior)
            return prior
        return cached[1]

    def propose(self, scene, image, occupancy, rng):
        prior = self.prior_for(scene, image, occupancy, rng)
        i, j = importance_sample(prior, rng, self.floor, self.law, self.temperature)
        x, y = prior.centers_mm[i]
        grasp = GraspConfig(float(x), float(y), AngleBin(j).center_deg)
        return Proposal(grasp, float(prior.entries[i, j]))
