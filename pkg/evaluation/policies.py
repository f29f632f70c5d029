"""
Test-time grasp selection
ArgmaxPolicy executes the best (patch, bin) among sampled candidates;
RerankPolicy rescores the top candidates by how well their neighbourhood
scores, which tolerates millimetre-scale execution error.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

import config
from collector.roi import occupied_components, sample_grasp, sample_roi
from collector.trial_collector import Proposal
from curriculum.prior import build_prior, extract_batch
from patches.patch_pipeline import AngleBin
from simulator.grasp_oracle import grasp_oracle
from simulator.models import GraspConfig, GripperSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RerankCandidate:
    patch_index: int
    bin_index: int
    center_mm: tuple
    theta_deg: float
    score: float
    reranked_score: float


def neighbour_centers(center_mm, n_neighbors, radius_mm, rng, workspace):
    """Points uniform in a disc around center_mm, clamped onto the table"""
    if n_neighbors == 0:
        return np.zeros((0, 2))
    radius = radius_mm * np.sqrt(rng.random(n_neighbors))
    angle = 2.0 * math.pi * rng.random(n_neighbors)
    points = np.column_stack([center_mm[0] + radius * np.cos(angle), center_mm[1] + radius * np.sin(angle)])
    upper = np.array([workspace.width_mm, workspace.height_mm]) - 1e-6
    return np.clip(points, 0.0, upper)


def top_cells(entries, top_k):
    """Flat (patch, bin) cells by descending score; equal scores keep the lowest patch index first"""
    order = np.argsort(-entries.ravel(), kind='stable')[:top_k]
    return [divmod(int(flat), entries.shape[1]) for flat in order]


def rerank(scorer, image, occupancy, workspace, rng, top_k=config.RERANK_TOP_K, n_neighbors=config.RERANK_NEIGHBORS,
           radius_mm=config.RERANK_RADIUS_MM, n_candidates=config.PRIOR_PATCHES, gripper=None,
           same_bin=False, input_side=config.PATCH_INPUT_SIDE):
    """
    Pick a grasp by neighbourhood re-ranking of the top-scoring candidates

    Args:
        scorer: (patches, centers_mm) -> (N, 18)
        image, occupancy: Rendered scene
        workspace: Workspace of the scene
        rng: numpy Generator for candidate and neighbour sampling
        top_k: Candidates kept for re-ranking
        n_neighbors: Neighbour patches per candidate; 0 keeps the candidate's own score
        radius_mm: Neighbourhood radius
        same_bin: Score neighbours in the candidate's bin instead of their best bin

    Returns:
        (GraspConfig, list of RerankCandidate in candidate order)
    """
    gripper = gripper or GripperSpec()
    prior = build_prior(scorer, image, occupancy, workspace, rng, n_candidates, gripper, input_side)
    candidates = []
    for i, j in top_cells(prior.entries, top_k):
        center = tuple(float(v) for v in prior.centers_mm[i])
        score = float(prior.entries[i, j])
        if n_neighbors > 0:
            centers = neighbour_centers(center, n_neighbors, radius_mm, rng, workspace)
            scores = np.asarray(scorer(extract_batch(image, centers, gripper, workspace, input_side), centers))
            reranked = float(np.mean(scores[:, j] if same_bin else scores.max(axis=1)))
        else:
            reranked = score
        candidates.append(RerankCandidate(i, j, center, AngleBin(j).center_deg, score, reranked))

    best = candidates[0]
    for candidate in candidates[1:]:
        if candidate.reranked_score > best.reranked_score:
            best = candidate
    return GraspConfig(best.center_mm[0], best.center_mm[1], best.theta_deg), candidates


class ArgmaxPolicy:
    """Executes the highest-scoring (patch, bin) cell of a sampled prior"""

    def __init__(self, scorer, gripper=None, n_candidates=config.PRIOR_PATCHES, input_side=config.PATCH_INPUT_SIDE):
        self.scorer = scorer
        self.gripper = gripper or GripperSpec()
        self.n_candidates = n_candidates
        self.input_side = input_side

    def propose(self, scene, image, occupancy, rng):
        prior = build_prior(self.scorer, image, occupancy, scene.workspace, rng, self.n_candidates,
                            self.gripper, self.input_side)
        i, j = top_cells(prior.entries, 1)[0]
        x, y = prior.centers_mm[i]
        return Proposal(GraspConfig(float(x), float(y), AngleBin(j).center_deg), float(prior.entries[i, j]))


class RerankPolicy:
    def __init__(self, scorer, gripper=None, top_k=config.RERANK_TOP_K, n_neighbors=config.RERANK_NEIGHBORS,
                 radius_mm=config.RERANK_RADIUS_MM, n_candidates=config.PRIOR_PATCHES, same_bin=False,
                 input_side=config.PATCH_INPUT_SIDE):
        self.scorer = scorer
        self.gripper = gripper or GripperSpec()
        self.top_k = top_k
        self.n_neighbors = n_neighbors
        self.radius_mm = radius_mm
        self.n_candidates = n_candidates
        self.same_bin = same_bin
        self.input_side = input_side

    def propose(self, scene, image, occupancy, rng):
        grasp, candidates = rerank(self.scorer, image, occupancy, scene.workspace, rng, self.top_k, self.n_neighbors,
                                   self.radius_mm, self.n_candidates, self.gripper, self.same_bin, self.input_side)
        chosen = max(candidates, key=lambda c: c.reranked_score)
        return Proposal(grasp, chosen.score)


class OraclePolicy:
    """
    Upper bound: searches sampled candidates at every bin center with the
    simulator itself and returns the first success (or the first candidate)
    """

    def __init__(self, gripper=None, n_candidates=config.PRIOR_PATCHES):
        self.gripper = gripper or GripperSpec()
        self.n_candidates = n_candidates

    def propose(self, scene, image, occupancy, rng):
        fallback = None
        for _ in range(self.n_candidates):
            roi = sample_roi(occupancy, rng)
            point = sample_grasp(roi, rng, scene.workspace)
            for j in range(config.NUM_ANGLE_BINS):
                grasp = GraspConfig(point.x_mm, point.y_mm, AngleBin(j).center_deg)
                fallback = fallback or grasp
                if grasp_oracle(scene, grasp, self.gripper).success:
                    return Proposal(grasp, 1.0)
        logger.debug(f"Oracle found no success among {self.n_candidates} candidates "
                     f"({len(occupied_components(occupancy))} components)")
        return Proposal(fallback, 0.0)
