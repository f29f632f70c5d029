"""
Closed-loop evaluation against the simulator: grasp success rates over a
scene distribution and the clutter-removal task.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

import config
from evaluation.reports import write_json_lines
from simulator.grasp_oracle import grasp_oracle
from simulator.models import GraspConfig, GripperSpec, Workspace
from simulator.render import render
from simulator.scene import generate_scene, remove_object

logger = logging.getLogger(__name__)


def jitter_grasp(grasp, sigma_mm, rng, workspace):
    """Gaussian positional error on an executed grasp, kept on the table"""
    if sigma_mm <= 0:
        return grasp
    dx, dy = rng.normal(0.0, sigma_mm, size=2)
    x = min(max(grasp.x_mm + dx, 0.0), workspace.width_mm - 1e-6)
    y = min(max(grasp.y_mm + dy, 0.0), workspace.height_mm - 1e-6)
    return GraspConfig(float(x), float(y), grasp.theta_deg)


@dataclass(frozen=True)
class GraspRateReport:
    successes: int
    tries: int

    @property
    def rate(self):
        return self.successes / self.tries if self.tries else None


def grasp_rate_eval(policy, library, n_tries=config.GRASP_RATE_TRIES, seed=0, jitter_mm=0.0,
                    objects_per_scene=config.OBJECTS_PER_SCENE, refresh_min_objects=config.SCENE_REFRESH_MIN_OBJECTS,
                    workspace=None, gripper=None, remove_on_success=True):
    """
    Execute n_tries policy-chosen grasps and count successes

    Args:
        policy: GraspPolicy
        library: Shapes the evaluation scenes are drawn from
        jitter_mm: Std-dev of the positional execution error (0 disables)

    Returns:
        GraspRateReport
    """
    workspace = workspace or Workspace()
    gripper = gripper or GripperSpec()
    rng = np.random.default_rng([seed, 31])
    scene, successes = None, 0

    for _ in range(n_tries):
        if scene is None or len(scene) == 0 or len(scene) < refresh_min_objects:
            scene = generate_scene(int(rng.integers(2 ** 31 - 1)), objects_per_scene, library, workspace)
            image, occupancy = render(scene)
        proposal = policy.propose(scene, image, occupancy, rng)
        outcome = grasp_oracle(scene, jitter_grasp(proposal.grasp, jitter_mm, rng, workspace), gripper)
        if outcome.success:
            successes += 1
            if remove_on_success:
                scene = remove_object(scene, outcome.object_id)
                image, occupancy = render(scene)

    report = GraspRateReport(successes, n_tries)
    logger.info(f"Grasp rate: {successes}/{n_tries} (jitter {jitter_mm} mm)")
    return report


def seen_vs_novel(policy, seen_library, novel_library, n_tries=config.GRASP_RATE_TRIES, seed=0, **kwargs):
    """Separate grasp rates for shapes used in training and held-out shapes"""
    return {
        'seen': grasp_rate_eval(policy, seen_library, n_tries, seed, **kwargs),
        'novel': grasp_rate_eval(policy, novel_library, n_tries, seed, **kwargs),
    }


@dataclass
class ClutterRunLog:
    run: int
    interactions: list = field(default_factory=list)
    cleared: bool = False

    @property
    def total_interactions(self):
        return len(self.interactions)

    @property
    def objects_cleared(self):
        return sum(1 for step in self.interactions if step['success'])


def clutter_removal(policy, library, n_objects=config.CLUTTER_OBJECTS, cap=config.CLUTTER_INTERACTION_CAP,
                    n_runs=config.CLUTTER_RUNS, seed=0, jitter_mm=0.0, workspace=None, gripper=None):
    """
    Grasp objects out of fresh cluttered scenes until the table is empty or the cap is hit

    Args:
        policy: GraspPolicy choosing each interaction
        library: Shapes for the scenes (a mix of seen and novel shapes)
        n_objects: Objects per scene
        cap: Interaction limit per run; a run hitting it is marked uncleared

    Returns:
        (list of ClutterRunLog, mean interactions per run)
    """
    workspace = workspace or Workspace()
    gripper = gripper or GripperSpec()
    logs = []
    for run in range(n_runs):
        rng = np.random.default_rng([seed, 41, run])
        scene = generate_scene(int(rng.integers(2 ** 31 - 1)), n_objects, library, workspace)
        image, occupancy = render(scene)
        log = ClutterRunLog(run)
        while len(scene) > 0 and log.total_interactions < cap:
            proposal = policy.propose(scene, image, occupancy, rng)
            executed = jitter_grasp(proposal.grasp, jitter_mm, rng, workspace)
            outcome = grasp_oracle(scene, executed, gripper)
            if outcome.success:
                scene = remove_object(scene, outcome.object_id)
                image, occupancy = render(scene)
            log.interactions.append({
                'run': run,
                'interaction': log.total_interactions,
                'x_mm': executed.x_mm,
                'y_mm': executed.y_mm,
                'theta_deg': executed.theta_deg,
                'success': bool(outcome.success),
                'failure_reason': outcome.failure_reason.value if outcome.failure_reason else None,
                'remaining': len(scene),
            })
        log.cleared = len(scene) == 0
        logs.append(log)
        logger.info(f"Clutter run {run}: {'cleared' if log.cleared else 'not cleared'} "
                    f"after {log.total_interactions} interactions")
    mean = float(np.mean([log.total_interactions for log in logs])) if logs else 0.0
    return logs, mean


def write_clutter_logs(path, logs):
    write_json_lines(path, [step for log in logs for step in log.interactions])
