"""
Staged learning with dataset aggregation
Stage k collects trials with the stage k-1 model as an importance sampler,
folds them into the running dataset with replication factor gamma and
fine-tunes the previous model on the result.
"""

import copy
import csv
import logging
from dataclasses import dataclass, field

import config
from collector.trial_collector import CollectionConfig, Dataset, collect, summarize
from curriculum.prior import ImportancePolicy, NetScorer
from learner.training import stage_schedule, train
from patches.patch_pipeline import crop_side_px
from patches.patch_store import build_training_arrays

logger = logging.getLogger(__name__)

STAGE_REPORT_COLUMNS = ['stage', 'trials', 'positives', 'grasp_rate', 'benchmark_accuracy']


@dataclass(frozen=True)
class StageConfig:
    gamma: int = config.IMPORTANCE_GAMMA
    n_patches: int = config.PRIOR_PATCHES
    trials_per_stage: int = config.STAGE_TRIALS
    novel_object_fraction: float = config.STAGE_NOVEL_FRACTION
    floor: float = config.IMPORTANCE_FLOOR
    law: str = config.IMPORTANCE_LAW
    temperature: float = 1.0
    aggregate: bool = True

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.trials_per_stage < 0:
            raise ValueError(f"trials_per_stage must be >= 0, got {self.trials_per_stage}")
        if not 0.0 <= self.novel_object_fraction <= 1.0:
            raise ValueError(f"novel_object_fraction must be in [0, 1], got {self.novel_object_fraction}")


class AggregatedDataset:
    """(record, replication weight) entries plus the stages they came from"""

    def __init__(self, entries=None, stages=None, scenes=None):
        self.entries = list(entries or [])
        self.stages = list(stages or [])
        self.scenes = dict(scenes or {})

    @classmethod
    def from_dataset(cls, dataset):
        if isinstance(dataset, AggregatedDataset):
            return cls(dataset.entries, dataset.stages, dataset.scenes)
        stages = sorted({record.stage for record in dataset.records})
        return cls([(record, 1) for record in dataset.records], stages, dataset.scenes)

    @property
    def records(self):
        return [record for record, _ in self.entries]

    @property
    def weights(self):
        return [weight for _, weight in self.entries]

    @property
    def effective_size(self):
        return sum(self.weights)

    def __len__(self):
        return len(self.entries)


def aggregate(previous, new, gamma=config.IMPORTANCE_GAMMA):
    """
    D_k = D_{k-1} (weights kept) followed by d_k replicated gamma times

    Args:
        previous: Dataset or AggregatedDataset
        new: Dataset collected at this stage
        gamma: Replication factor of the new records (>= 1)
    """
    if gamma < 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    base = AggregatedDataset.from_dataset(previous)
    entries = base.entries + [(record, int(gamma)) for record in new.records]
    stages = sorted(set(base.stages) | {record.stage for record in new.records})
    return AggregatedDataset(entries, stages, {**base.scenes, **new.scenes})


@dataclass(frozen=True)
class StageReport:
    stage: int
    trials: int
    positives: int
    grasp_rate: float
    benchmark_accuracy: float = None
    mean_failed_prior: float = None
    effective_size: int = 0

    def as_row(self):
        rate = '' if self.grasp_rate is None else repr(float(self.grasp_rate))
        accuracy = '' if self.benchmark_accuracy is None else repr(float(self.benchmark_accuracy))
        return [self.stage, self.trials, self.positives, rate, accuracy]


@dataclass
class StageResult:
    collected: Dataset
    aggregated: AggregatedDataset
    net: object
    report: StageReport
    curve: list = field(default_factory=list)


def train_on_entries(net, entries, store, stage, seed, gripper, workspace, augment_copies=config.AUGMENT_COPIES,
                     workers=1, schedule=None, bin_aligned=config.AUGMENT_BIN_ALIGNED):
    """Fine-tune (or train) net on (record, weight) entries with the stage's schedule"""
    arrays = build_training_arrays(entries, store, crop_side_px(gripper, workspace),
                                   net.architecture.input_side, augment_copies, seed=seed, bin_aligned=bin_aligned)
    return train(net, arrays, schedule or stage_schedule(stage, seed=seed), workers=workers)


def run_stage(net_prev, stage, stage_config, previous, seen_library, novel_library, store, seed,
              collection=None, benchmark=None, augment_copies=config.AUGMENT_COPIES, workers=1,
              schedule=None, bin_aligned=config.AUGMENT_BIN_ALIGNED):
    """
    One round of importance-sampled collection, aggregation and fine-tuning

    Args:
        net_prev: Trained GraspNet from stage - 1 (not modified)
        stage: Stage number k >= 1
        stage_config: StageConfig
        previous: D_{k-1} as Dataset or AggregatedDataset
        seen_library, novel_library: Shapes for the scene mix
        store: PatchStore shared with the previous datasets
        seed: Run seed
        collection: CollectionConfig template (workspace, gripper, scene policy)
        benchmark: Optional callable net -> accuracy on the frozen test set
        schedule: TrainConfig list for fine-tuning (stage-k defaults when None)
        bin_aligned: Rotate augmented copies by whole bins instead of continuous angles

    Returns:
        StageResult (d_k, D_k, model_k, report)
    """
    if stage < 1:
        raise ValueError(f"Staged collection starts at stage 1, got {stage}")
    template = collection or CollectionConfig()
    collection = CollectionConfig(
        n_trials=stage_config.trials_per_stage, stage=stage, tag='s',
        objects_per_scene=template.objects_per_scene, refresh_min_objects=template.refresh_min_objects,
        max_trials_per_scene=template.max_trials_per_scene, shards=template.shards,
        remove_on_success=template.remove_on_success, novel_fraction=stage_config.novel_object_fraction,
        workspace=template.workspace, gripper=template.gripper)

    logger.info("=" * 60)
    logger.info(f"Stage {stage}: collecting {stage_config.trials_per_stage} importance-sampled trials")
    policy = ImportancePolicy(NetScorer(net_prev), collection.gripper, stage_config.n_patches, stage_config.floor,
                              stage_config.law, stage_config.temperature, net_prev.architecture.input_side)
    collected = collect(collection, seed, seen_library, policy=policy, novel_library=novel_library,
                        store=store, workers=workers)

    aggregated = aggregate(previous, collected, stage_config.gamma)
    if stage_config.aggregate:
        training_entries = aggregated.entries
    else:
        training_entries = [(record, 1) for record in collected.records]

    net = copy.deepcopy(net_prev)
    curve = []
    if training_entries:
        curve = train_on_entries(net, training_entries, store, stage, seed + stage, collection.gripper,
                                 collection.workspace, augment_copies, workers, schedule, bin_aligned).curve

    stats = summarize(collected)
    failed = [r.prior_score for r in collected.records if not r.label and r.prior_score is not None]
    report = StageReport(
        stage=stage, trials=stats.total, positives=stats.positives, grasp_rate=stats.grasp_rate,
        benchmark_accuracy=benchmark(net) if benchmark is not None else None,
        mean_failed_prior=sum(failed) / len(failed) if failed else None,
        effective_size=aggregated.effective_size if stage_config.aggregate else len(training_entries))
    rate = 'n/a' if stats.grasp_rate is None else f"{stats.grasp_rate:.3f}"
    logger.info(f"Stage {stage} done: {stats.positives}/{stats.total} positive (rate {rate}), "
                f"effective size {report.effective_size}")
    return StageResult(collected, aggregated, net, report, curve)


def run_stages(net0, stage_config, dataset0, seen_library, novel_library, store, seed, n_stages=config.NUM_STAGES,
               collection=None, benchmark=None, augment_copies=config.AUGMENT_COPIES, workers=1, schedule=None,
               schedule_for=None, bin_aligned=config.AUGMENT_BIN_ALIGNED):
    """
    Chain run_stage for k = 1..n_stages; returns the list of StageResult

    `schedule_for(stage)` gives each stage its own fine-tuning schedule and
    takes precedence over the shared `schedule`.
    """
    results = []
    net, previous = net0, dataset0
    for stage in range(1, n_stages + 1):
        result = run_stage(net, stage, stage_config, previous, seen_library, novel_library, store, seed,
                           collection, benchmark, augment_copies, workers,
                           schedule_for(stage) if schedule_for is not None else schedule, bin_aligned)
        results.append(result)
        net = result.net
        previous = result.aggregated if stage_config.aggregate else result.collected
    return results


def write_stage_reports(path, reports):
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(STAGE_REPORT_COLUMNS)
        for report in reports:
            writer.writerow(report.as_row())
