"""
Ablation runner
Four sweeps on the frozen benchmark: training-set size, pretraining vs
scratch, number of stages, and aggregation on vs off.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

import config
from collector.trial_collector import CollectionConfig, collect
from curriculum.staged_learning import StageConfig, run_stage, run_stages
from evaluation.experiment import stagek_schedule, train_stage0
from evaluation.reports import format_table, write_table_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AblationConfig:
    sizes: tuple = config.ABLATION_SIZES
    seeds: tuple = config.ABLATION_SEEDS
    n_stages: int = config.NUM_STAGES
    stage: StageConfig = field(default_factory=StageConfig)


@dataclass
class AblationReport:
    """One table per sweep: {name: (header, rows)}"""
    tables: dict = field(default_factory=dict)

    def to_text(self):
        return '\n'.join(f"{name}\n{format_table(header, rows)}" for name, (header, rows) in self.tables.items())

    def write(self, directory):
        for name, (header, rows) in self.tables.items():
            write_table_csv(directory / f"ablation_{name}.csv", header, rows)
        (directory / 'ablations.txt').write_text(self.to_text())


def _collect_random(context, n_trials, seed):
    template = context.collection
    collection = CollectionConfig(
        n_trials=n_trials, stage=0, tag='a', objects_per_scene=template.objects_per_scene,
        refresh_min_objects=template.refresh_min_objects, max_trials_per_scene=template.max_trials_per_scene,
        shards=template.shards, remove_on_success=template.remove_on_success,
        workspace=template.workspace, gripper=template.gripper)
    return collect(collection, seed, list(context.split.seen), store=context.store, workers=context.workers)


def data_size_sweep(context, sizes, seeds):
    rows = []
    for seed in seeds:
        full = _collect_random(context, max(sizes), seed)
        for size in sizes:
            net, _ = train_stage0(context, full.take(size), seed)
            rows.append([size, seed, context.evaluate(net)])
            logger.info(f"Data size {size} seed {seed}: accuracy {rows[-1][2]:.3f}")
    means = [[size, 'mean', float(np.mean([r[2] for r in rows if r[0] == size]))] for size in sizes]
    return ['size', 'seed', 'accuracy'], rows + means


def pretraining_sweep(context, dataset, seeds):
    rows = []
    for seed in seeds:
        scratch, _ = train_stage0(context, dataset, seed, pretrained=False)
        pretrained, _ = train_stage0(context, dataset, seed, pretrained=True)
        rows.append([seed, context.evaluate(scratch), context.evaluate(pretrained)])
    return ['seed', 'scratch', 'pretrained'], rows


def staging_sweep(context, dataset, seeds, stage_config, n_stages):
    rows = []
    for seed in seeds:
        net0, _ = train_stage0(context, dataset, seed)
        accuracies = [context.evaluate(net0)]
        results = run_stages(net0, stage_config, dataset, list(context.split.seen), list(context.split.novel),
                             context.store, seed, n_stages, context.collection, context.evaluate,
                             context.augment_copies, context.workers,
                             schedule_for=lambda stage: stagek_schedule(context, stage, seed),
                             bin_aligned=context.bin_aligned)
        accuracies += [result.report.benchmark_accuracy for result in results]
        rows.append([seed] + accuracies)
    return ['seed'] + [f"stage{k}" for k in range(n_stages + 1)], rows


def aggregation_sweep(context, dataset, seeds, stage_config):
    rows = []
    for seed in seeds:
        net0, _ = train_stage0(context, dataset, seed)
        accuracies = []
        for aggregate in (True, False):
            stage_on_off = StageConfig(stage_config.gamma, stage_config.n_patches, stage_config.trials_per_stage,
                                       stage_config.novel_object_fraction, stage_config.floor, stage_config.law,
                                       stage_config.temperature, aggregate)
            result = run_stage(net0, 1, stage_on_off, dataset, list(context.split.seen), list(context.split.novel),
                               context.store, seed, context.collection, context.evaluate, context.augment_copies,
                               context.workers, stagek_schedule(context, 1, seed), context.bin_aligned)
            accuracies.append(result.report.benchmark_accuracy)
        rows.append([seed] + accuracies)
    return ['seed', 'aggregated', 'new_data_only'], rows


def run_ablations(context, dataset, ablation_config=None):
    """
    Args:
        context: ExperimentContext with the frozen test set
        dataset: Random-trial Dataset used by the pretraining, staging and aggregation sweeps
        ablation_config: AblationConfig

    Returns:
        AblationReport with tables data_size, pretraining, staging and aggregation
    """
    ablation_config = ablation_config or AblationConfig()
    seeds = tuple(ablation_config.seeds)
    report = AblationReport()
    logger.info("=" * 60)
    logger.info(f"Ablations over seeds {seeds}")
    report.tables['data_size'] = data_size_sweep(context, tuple(ablation_config.sizes), seeds)
    report.tables['pretraining'] = pretraining_sweep(context, dataset, seeds)
    report.tables['staging'] = staging_sweep(context, dataset, seeds, ablation_config.stage, ablation_config.n_stages)
    report.tables['aggregation'] = aggregation_sweep(context, dataset, seeds, ablation_config.stage)
    return report
