"""
Trial-and-error grasp collection
Scene generation -> region of interest -> grasp -> execution and annotation,
looped until the trial budget is spent. The budget is split into a fixed
number of shards, each with its own scene and RNG stream, so the merged
dataset does not depend on how many workers ran the shards.
"""

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

import config
from collector.roi import sample_grasp, sample_roi
from patches.patch_pipeline import extract_context
from patches.patch_store import PatchStore
from simulator.grasp_oracle import grasp_oracle
from simulator.models import GripperSpec, Workspace
from simulator.render import render
from simulator.scene import generate_scene, remove_object
from worker_pool import run_ordered

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialRecord:
    """One executed grasp; stage 0 marks random trials"""
    scene_id: str
    grasp: object
    label: bool
    stage: int = 0
    patch_path: str = ''
    failure_reason: str = None
    prior_score: float = None
    object_id: int = None

    def __post_init__(self):
        if self.stage < 0:
            raise ValueError(f"Stage must be >= 0, got {self.stage}")


@dataclass(frozen=True)
class ExecutedTrial:
    record: TrialRecord
    outcome: object
    scene_after: object


@dataclass(frozen=True)
class DatasetStats:
    positives: int
    negatives: int
    total: int
    grasp_rate: float = None  # None when total == 0

    def as_row(self, name):
        rate = '' if self.grasp_rate is None else f"{100.0 * self.grasp_rate:.2f}%"
        return [name, self.positives, self.negatives, self.total, rate]


@dataclass(frozen=True)
class Proposal:
    grasp: object
    score: float = None


class GraspPolicy(Protocol):
    """Chooses the next grasp to execute in a scene"""

    def propose(self, scene, image, occupancy, rng) -> Proposal:
        ...


class RandomPolicy:
    """Random region of interest, uniform point inside it, uniform angle"""

    def propose(self, scene, image, occupancy, rng):
        roi = sample_roi(occupancy, rng)
        return Proposal(sample_grasp(roi, rng, scene.workspace))


@dataclass(frozen=True)
class CollectionConfig:
    n_trials: int = config.COLLECTION_TRIALS
    stage: int = 0
    tag: str = 'r'
    objects_per_scene: int = config.OBJECTS_PER_SCENE
    refresh_min_objects: int = config.SCENE_REFRESH_MIN_OBJECTS
    max_trials_per_scene: int = config.MAX_TRIALS_PER_SCENE
    shards: int = config.COLLECTION_SHARDS
    remove_on_success: bool = config.REMOVE_ON_SUCCESS
    novel_fraction: float = 0.0
    workspace: Workspace = field(default_factory=Workspace)
    gripper: GripperSpec = field(default_factory=GripperSpec)

    def __post_init__(self):
        if self.n_trials < 0:
            raise ValueError(f"n_trials must be >= 0, got {self.n_trials}")
        if self.shards < 1:
            raise ValueError(f"shards must be >= 1, got {self.shards}")
        if not 0.0 <= self.novel_fraction <= 1.0:
            raise ValueError(f"novel_fraction must be in [0, 1], got {self.novel_fraction}")

    def provenance(self, seed):
        return {
            'seed': int(seed),
            'n_trials': self.n_trials,
            'stage': self.stage,
            'tag': self.tag,
            'objects_per_scene': self.objects_per_scene,
            'refresh_min_objects': self.refresh_min_objects,
            'max_trials_per_scene': self.max_trials_per_scene,
            'shards': self.shards,
            'remove_on_success': self.remove_on_success,
            'novel_fraction': self.novel_fraction,
        }


class Dataset:
    """
    Ordered trial records plus the scene snapshots they were executed in

    Records are appended in collection order; `scenes` maps every scene_id
    referenced by a record to the scene as it was before that grasp.
    """

    def __init__(self, records=None, provenance=None, scenes=None, store=None):
        self.records = list(records or [])
        self.provenance = dict(provenance or {})
        self.scenes = dict(scenes or {})
        self.store = store if store is not None else PatchStore()

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record, scene=None):
        self.records.append(record)
        if scene is not None:
            self.scenes.setdefault(record.scene_id, scene)

    def extend(self, other):
        for record in other.records:
            self.append(record, other.scenes.get(record.scene_id))

    def for_stage(self, stage):
        return [record for record in self.records if record.stage == stage]

    def take(self, n):
        """Dataset holding the first n records"""
        records = self.records[:n]
        scenes = {r.scene_id: self.scenes[r.scene_id] for r in records if r.scene_id in self.scenes}
        return Dataset(records, {**self.provenance, 'take': n}, scenes, self.store)


def execute_trial(scene, grasp, gripper, stage, scene_id='', image=None, store=None, patch_key=None,
                  remove_on_success=config.REMOVE_ON_SUCCESS, prior_score=None):
    """
    Execute and annotate one grasp

    Args:
        scene: Scene before the grasp
        grasp: GraspConfig to execute
        gripper: GripperSpec
        stage: Collection stage stamped on the record
        scene_id: Identifier of the scene snapshot
        image: Pre-rendered scene image (rendered here when None)
        store: PatchStore receiving the context crop under patch_key
        remove_on_success: Lift the grasped object out of the returned scene
        prior_score: Model score that led to this grasp, if any

    Returns:
        ExecutedTrial with the record, the oracle outcome and the scene after the grasp
    """
    outcome = grasp_oracle(scene, grasp, gripper)
    patch_path = ''
    if store is not None:
        if image is None:
            image, _ = render(scene)
        patch_path = store.put(patch_key or f"patches/{scene_id}.pgm",
                               extract_context(image, grasp, gripper, scene.workspace))

    scene_after = scene
    if outcome.success and remove_on_success:
        scene_after = remove_object(scene, outcome.object_id)

    reason = outcome.failure_reason.value if outcome.failure_reason is not None else None
    record = TrialRecord(scene_id=scene_id, grasp=grasp, label=bool(outcome.success), stage=stage,
                         patch_path=patch_path, failure_reason=reason, prior_score=prior_score,
                         object_id=outcome.object_id)
    return ExecutedTrial(record=record, outcome=outcome, scene_after=scene_after)


def shard_sizes(n_trials, shards):
    base, extra = divmod(n_trials, shards)
    return [base + (1 if index < extra else 0) for index in range(shards)]


def _collect_shard(shard, n_trials, collection, seed, library, novel_library, policy, store):
    rng = np.random.default_rng([int(seed), collection.stage, shard])
    records, scenes = [], {}
    scene = None
    episode = version = on_scene = 0

    def needs_refresh():
        return (scene is None or len(scene) == 0 or len(scene) < collection.refresh_min_objects
                or on_scene >= collection.max_trials_per_scene)

    while len(records) < n_trials:
        if needs_refresh():
            source = library
            if novel_library and collection.novel_fraction > 0.0 and rng.random() < collection.novel_fraction:
                source = novel_library
            scene_seed = int(rng.integers(2 ** 31 - 1))
            scene = generate_scene(scene_seed, collection.objects_per_scene, source, collection.workspace)
            episode, version, on_scene = episode + 1, 0, 0
            image, occupancy = render(scene)

        scene_id = f"{collection.tag}{collection.stage}-{shard:02d}-{episode:04d}-{version:02d}"
        scenes.setdefault(scene_id, scene)

        proposal = policy.propose(scene, image, occupancy, rng)
        trial = execute_trial(scene, proposal.grasp, collection.gripper, collection.stage, scene_id=scene_id,
                              image=image, store=store, patch_key=f"patches/{scene_id}-t{len(records):05d}.pgm",
                              remove_on_success=collection.remove_on_success, prior_score=proposal.score)
        records.append(trial.record)
        on_scene += 1
        logger.debug(f"Shard {shard}: {scene_id} grasp ({proposal.grasp.x_mm:.1f}, {proposal.grasp.y_mm:.1f}, "
                     f"{proposal.grasp.theta_deg:.1f}) -> {trial.record.label}")

        if trial.scene_after is not scene:
            scene, version = trial.scene_after, version + 1
            image, occupancy = render(scene)

    return records, scenes


def collect(collection, seed, library, policy=None, novel_library=None, store=None, workers=1):
    """
    Run the trial-and-error protocol

    Args:
        collection: CollectionConfig (trial budget, scene refresh policy, stage)
        seed: Integer seed; shard s draws from default_rng([seed, stage, s])
        library: Shapes scenes are drawn from
        policy: GraspPolicy choosing grasps (RandomPolicy when None)
        novel_library: Shapes used for a `novel_fraction` share of scenes
        store: PatchStore receiving context crops
        workers: Threads running the shards

    Returns:
        Dataset whose records are the shards' records concatenated in shard order
    """
    policy = policy or RandomPolicy()
    store = store if store is not None else PatchStore()
    sizes = shard_sizes(collection.n_trials, collection.shards)
    tasks = [
        (lambda shard=shard, size=size: _collect_shard(shard, size, collection, seed, library,
                                                        novel_library, policy, store))
        for shard, size in enumerate(sizes)
    ]
    dataset = Dataset(provenance=collection.provenance(seed), store=store)
    for records, scenes in run_ordered(tasks, workers):
        for record in records:
            dataset.append(record, scenes[record.scene_id])

    stats = summarize(dataset)
    logger.info(f"Collected {stats.total} trials (stage {collection.stage}): "
                f"{stats.positives} positive, {stats.negatives} negative")
    return dataset


def summarize(records, stage=None):
    """
    Positive and negative counts with the grasp rate

    Args:
        records: Dataset or iterable of TrialRecord
        stage: Only count records of this stage when given

    Returns:
        DatasetStats; grasp_rate is None for an empty selection
    """
    selected = [r for r in records if stage is None or r.stage == stage]
    positives = sum(1 for r in selected if r.label)
    total = len(selected)
    return DatasetStats(positives=positives, negatives=total - positives, total=total,
                        grasp_rate=positives / total if total else None)
