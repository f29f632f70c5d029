"""
Subcommands
Each takes a Pipeline, writes its artifacts into the run directory and
returns the one-line summary printed by the CLI.
"""

import csv
import json
import logging

import config
from collector.dataset_io import save_dataset, write_dataset_csv
from collector.trial_collector import DatasetStats, RandomPolicy, summarize
from curriculum.prior import NetScorer
from curriculum.staged_learning import STAGE_REPORT_COLUMNS, StageReport, run_stage, write_stage_reports
from evaluation.ablations import AblationConfig, run_ablations
from evaluation.experiment import baseline_methods, pretrained_net, stagek_schedule
from evaluation.metrics import ScorerPredictor, accuracy, compare_all
from evaluation.policies import ArgmaxPolicy, RerankPolicy, rerank
from evaluation.reports import TABLE_ONE_HEADER, format_table, table_one, write_table_csv
from evaluation.robot_tests import clutter_removal, grasp_rate_eval, seen_vs_novel, write_clutter_logs
from learner.checkpoint import load_network, save_network
from learner.network import GraspNet
from learner.pretrain import aux_accuracy, build_shape_dataset
from learner.training import TrainConfig, train, training_accuracy, write_loss_curve
from simulator.render import render
from simulator.scene import generate_scene
from simulator.scene_io import write_pgm, write_scene_file
from storage.database import SOURCE_NAMES, DatabaseManager, default_database_url

logger = logging.getLogger(__name__)


def _rate(value):
    return 'n/a' if value is None else f"{100.0 * value:.2f}%"


def _write_table(pipeline, name, header, rows):
    write_table_csv(pipeline.out / f"{name}.csv", header, rows)
    (pipeline.out / f"{name}.txt").write_text(format_table(header, rows))


def gen_scenes(pipeline):
    """Sample cluttered scenes from the seen shapes and render a preview of the first"""
    section = pipeline.run_config.collection
    rng = pipeline.rng(5)
    scenes = {}
    for index in range(section.n_scenes):
        scenes[f"g-{index:04d}"] = generate_scene(int(rng.integers(2 ** 31 - 1)), section.objects_per_scene,
                                                  list(pipeline.split.seen), pipeline.workspace)
    write_scene_file(pipeline.out / 'scenes.txt', scenes)
    if scenes:
        image, _ = render(next(iter(scenes.values())))
        write_pgm(pipeline.out / 'scene_preview.pgm', image)

    with open(pipeline.out / 'library.csv', 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['name', 'family', 'subset'])
        for subset in ('seen', 'novel', 'test'):
            for shape in getattr(pipeline.split, subset):
                writer.writerow([shape.name, shape.family, subset])
    return f"Generated {len(scenes)} scenes from {len(pipeline.split.seen)} seen shapes"


def collect_trials(pipeline):
    dataset = pipeline.random_dataset()
    rows = table_one({'Random Trials': dataset.records})
    _write_table(pipeline, 'table_one', TABLE_ONE_HEADER, rows)
    stats = summarize(dataset)
    return (f"Collected {stats.total} random trials: {stats.positives} positive, {stats.negatives} negative "
            f"(grasp rate {_rate(stats.grasp_rate)})")


def _pretrain(pipeline, context):
    net, report = pretrained_net(context, pipeline.seed)
    save_network(pipeline.out / 'pretrained.ckpt', net)
    with open(pipeline.out / 'loss_pretrain.csv', 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['epoch', 'loss'])
        for epoch, loss in enumerate(report.curve):
            writer.writerow([epoch, repr(float(loss))])
    return net, report


def pretrain(pipeline):
    """Shape-family pretraining of the feature extractor"""
    context = pipeline.context()
    net, report = _pretrain(pipeline, context)
    held_out = build_shape_dataset(list(pipeline.split.seen), max(1, context.pretrain_samples // 5),
                                   pipeline.seed + 1, context.crop_side, context.architecture.input_side,
                                   context.workspace.px_per_mm)
    score = aux_accuracy(net, held_out, report.aux_weight, report.aux_bias)
    final = report.curve[-1] if report.curve else float('nan')
    return f"Pretrained {net.parameter_count()} parameters: final loss {final:.4f}, shape accuracy {score:.3f}"


def _initial_net(pipeline, context):
    if not pipeline.run_config.pretrain.enabled:
        return GraspNet(context.architecture, seed=pipeline.seed)
    path = pipeline.find('pretrained.ckpt')
    if path is not None:
        logger.info(f"Starting from pretrained checkpoint {path}")
        return load_network(path)
    return _pretrain(pipeline, context)[0]


def train_stage0(pipeline):
    """Stage-0 model on the random-trial dataset"""
    dataset = pipeline.random_dataset()
    context = pipeline.context()
    net = _initial_net(pipeline, context)
    arrays = context.training_arrays([(record, 1) for record in dataset.records], pipeline.seed)
    schedule = [TrainConfig(context.stage0_learning_rate, context.stage0_epochs, context.batch_size,
                            context.momentum, pipeline.seed)]
    result = train(net, arrays, schedule, workers=pipeline.workers)
    save_network(pipeline.out / 'model_stage0.ckpt', net)
    write_loss_curve(pipeline.out / 'loss_stage0.csv', result.curve)
    final = 'n/a' if result.final_loss is None else f"{result.final_loss:.2f}"
    return (f"Trained stage 0 on {len(arrays)} patches ({len(dataset)} trials): final loss {final}, "
            f"training accuracy {training_accuracy(net, arrays):.3f}")


def run_staged(pipeline):
    """Importance-sampled collection and fine-tuning for every configured stage"""
    dataset0 = pipeline.random_dataset()
    net = pipeline.model(0, 'train')
    test_set = pipeline.test_set
    context = pipeline.context(test_set)
    stage_config = pipeline.stage_config()

    stats0 = summarize(dataset0)
    reports = [StageReport(stage=0, trials=stats0.total, positives=stats0.positives, grasp_rate=stats0.grasp_rate,
                           benchmark_accuracy=context.evaluate(net), effective_size=len(dataset0))]
    pipeline.db.log_stage_report(pipeline.run_id, reports[0])
    previous = dataset0
    for stage in range(1, pipeline.run_config.stage.n_stages + 1):
        result = run_stage(net, stage, stage_config, previous, list(pipeline.split.seen), list(pipeline.split.novel),
                           pipeline.store, pipeline.seed, context.collection, context.evaluate,
                           context.augment_copies, pipeline.workers, stagek_schedule(context, stage, pipeline.seed),
                           context.bin_aligned)
        save_dataset(result.collected, pipeline.out, f"stage{stage}")
        write_dataset_csv(pipeline.out / f"aggregated{stage}.csv", result.aggregated.records,
                          result.aggregated.weights)
        save_network(pipeline.out / f"model_stage{stage}.ckpt", result.net)
        write_loss_curve(pipeline.out / f"loss_stage{stage}.csv", result.curve)
        pipeline.db.log_trials(pipeline.run_id, result.collected.records, 'staged')
        pipeline.db.log_stage_report(pipeline.run_id, result.report)
        reports.append(result.report)
        net = result.net
        previous = result.aggregated if stage_config.aggregate else result.collected

    write_stage_reports(pipeline.out / 'stage_reports.csv', reports)
    last = reports[-1]
    return (f"Ran {len(reports) - 1} stages: last grasp rate {_rate(last.grasp_rate)}, "
            f"benchmark accuracy {reports[0].benchmark_accuracy:.3f} -> {last.benchmark_accuracy:.3f}")


def _latest(pipeline):
    latest = pipeline.latest_model()
    if latest is None:
        pipeline.require('model_stage0.ckpt', 'train')
    return latest


def evaluate(pipeline):
    """Benchmark accuracy and seen/novel grasp rates of the latest model"""
    stage, net = _latest(pipeline)
    section = pipeline.run_config.eval
    entry = accuracy(ScorerPredictor(NetScorer(net)), pipeline.test_set, section.threshold, f"stage {stage}")
    policy = ArgmaxPolicy(NetScorer(net), pipeline.gripper, pipeline.run_config.stage.n_patches,
                          net.architecture.input_side)
    rates = seen_vs_novel(policy, list(pipeline.split.seen), list(pipeline.split.test), section.grasp_rate_tries,
                          pipeline.seed, workspace=pipeline.workspace, gripper=pipeline.gripper,
                          objects_per_scene=pipeline.run_config.collection.objects_per_scene)
    result = {
        'stage': stage,
        'accuracy': entry.accuracy,
        'correct': entry.correct,
        'total': entry.total,
        'grasp_rate': {name: {'successes': r.successes, 'tries': r.tries, 'rate': r.rate} for name, r in rates.items()},
    }
    (pipeline.out / 'eval.json').write_text(json.dumps(result, indent=2, sort_keys=True) + '\n')
    return (f"Stage {stage} model: accuracy {entry.accuracy:.3f} ({entry.correct}/{entry.total}), "
            f"grasp rate seen {_rate(rates['seen'].rate)} / novel {_rate(rates['novel'].rate)}")


def bench(pipeline):
    """Comparison table of the heuristics, kNN, SVM and the learned models on one benchmark"""
    dataset = pipeline.random_dataset()
    test_set = pipeline.test_set
    context = pipeline.context(test_set)
    section = pipeline.run_config.baselines
    arrays = context.training_arrays([(record, 1) for record in dataset.records], pipeline.seed)
    methods = baseline_methods(context, arrays, test_set, pipeline.seed, pipeline.hog_config(), section.knn_k_grid,
                               section.svm_c_grid, section.svm_epochs, section.svm_validation_fraction,
                               section.heuristic_thresholds_deg, section.heuristic_limits_px)
    methods['Deep Net'] = ScorerPredictor(NetScorer(pipeline.model(0, 'train')))
    latest = pipeline.latest_model()
    if latest is not None and latest[0] >= 1:
        methods['Deep Net + Multi-stage'] = ScorerPredictor(NetScorer(latest[1]))

    report = compare_all(methods, test_set, pipeline.run_config.eval.threshold)
    report.write(pipeline.out / 'bench.csv', pipeline.out / 'bench.txt')

    staged = [record for stage_dataset in pipeline.staged_datasets() for record in stage_dataset.records]
    collections = {'Random Trials': dataset.records}
    if staged:
        collections['Multi-Staged'] = staged
    collections['Test Set'] = test_set.raw_records
    _write_table(pipeline, 'table_one', TABLE_ONE_HEADER, table_one(collections))

    best = max(report.entries, key=lambda e: e.accuracy)
    return f"Compared {len(report.entries)} methods on {len(test_set)} test records: best {best.method} {best.accuracy:.3f}"


def ablate(pipeline):
    dataset = pipeline.random_dataset()
    context = pipeline.context(pipeline.test_set)
    section = pipeline.run_config.ablation
    ablation_config = AblationConfig(tuple(section.sizes), tuple(section.seeds), pipeline.run_config.stage.n_stages,
                                     pipeline.stage_config())
    report = run_ablations(context, dataset, ablation_config)
    report.write(pipeline.out)
    return f"Ran {len(report.tables)} ablation sweeps over seeds {list(section.seeds)}"


def rerank_demo(pipeline):
    """Argmax versus neighbourhood re-ranking under execution jitter"""
    stage, net = _latest(pipeline)
    section = pipeline.run_config.eval
    scorer = NetScorer(net)
    n_candidates = pipeline.run_config.stage.n_patches
    input_side = net.architecture.input_side
    policies = {
        'argmax': ArgmaxPolicy(scorer, pipeline.gripper, n_candidates, input_side),
        'rerank': RerankPolicy(scorer, pipeline.gripper, section.rerank_top_k, section.rerank_neighbors,
                               section.rerank_radius_mm, n_candidates, section.rerank_same_bin, input_side),
    }
    rows = []
    for name, policy in policies.items():
        report = grasp_rate_eval(policy, list(pipeline.split.seen), section.grasp_rate_tries, pipeline.seed,
                                 section.jitter_mm, pipeline.run_config.collection.objects_per_scene,
                                 workspace=pipeline.workspace, gripper=pipeline.gripper)
        rows.append([name, report.successes, report.tries, report.rate])
    write_table_csv(pipeline.out / 'rerank.csv', ['policy', 'successes', 'tries', 'rate'], rows)

    rng = pipeline.rng(17)
    scene = generate_scene(int(rng.integers(2 ** 31 - 1)), pipeline.run_config.collection.objects_per_scene,
                           list(pipeline.split.seen), pipeline.workspace)
    image, occupancy = render(scene)
    _, candidates = rerank(scorer, image, occupancy, pipeline.workspace, rng, section.rerank_top_k,
                           section.rerank_neighbors, section.rerank_radius_mm, n_candidates, pipeline.gripper,
                           section.rerank_same_bin, input_side)
    write_table_csv(pipeline.out / 'rerank_candidates.csv',
                    ['patch', 'bin', 'x_mm', 'y_mm', 'theta_deg', 'score', 'reranked_score'],
                    [[c.patch_index, c.bin_index, repr(c.center_mm[0]), repr(c.center_mm[1]), c.theta_deg,
                      repr(c.score), repr(c.reranked_score)] for c in candidates])
    return (f"Stage {stage} model with {section.jitter_mm} mm jitter: argmax {_rate(rows[0][3])}, "
            f"rerank {_rate(rows[1][3])}")


def clutter(pipeline):
    """Clutter removal with the random policy and, when a model exists, the re-ranking policy"""
    section = pipeline.run_config.eval
    policies = {'random': RandomPolicy()}
    latest = pipeline.latest_model()
    if latest is not None:
        net = latest[1]
        policies['model'] = RerankPolicy(NetScorer(net), pipeline.gripper, section.rerank_top_k,
                                         section.rerank_neighbors, section.rerank_radius_mm,
                                         pipeline.run_config.stage.n_patches, section.rerank_same_bin,
                                         net.architecture.input_side)
    library = list(pipeline.split.seen) + list(pipeline.split.novel)
    rows = []
    for name, policy in policies.items():
        logs, mean = clutter_removal(policy, library, section.clutter_objects, section.clutter_cap,
                                     section.clutter_runs, pipeline.seed, section.jitter_mm,
                                     pipeline.workspace, pipeline.gripper)
        write_clutter_logs(pipeline.out / f"clutter_{name}.jsonl", logs)
        rows.append([name, len(logs), sum(1 for log in logs if log.cleared), mean])
    write_table_csv(pipeline.out / 'clutter.csv', ['policy', 'runs', 'cleared', 'mean_interactions'], rows)
    return ', '.join(f"{row[0]}: {row[3]:.1f} interactions/run ({row[2]}/{row[1]} cleared)" for row in rows)


def report(pipeline):
    """Dataset statistics and stage reports from the ledgers of this and the --from runs"""
    urls = [pipeline.db.database_url]
    for directory in pipeline.sources:
        if config.DATABASE_URL is None and (directory / 'run.db').exists():
            urls.append(default_database_url(directory))

    totals, stage_rows = {}, []
    for url in urls:
        ledger = DatabaseManager(url)
        for row in ledger.get_dataset_stats():
            positives, total = totals.get(row['name'], (0, 0))
            totals[row['name']] = (positives + row['positives'], total + row['total'])
        stage_rows += [[row[column] for column in STAGE_REPORT_COLUMNS] for row in ledger.get_stage_reports()]

    rows, positives_all, total_all = [], 0, 0
    for name in [name for name in SOURCE_NAMES.values() if name in totals]:
        positives, total = totals[name]
        rows.append(DatasetStats(positives, total - positives, total, positives / total if total else None).as_row(name))
        positives_all += positives
        total_all += total
    rows.append(DatasetStats(positives_all, total_all - positives_all, total_all,
                             positives_all / total_all if total_all else None).as_row('Total'))
    _write_table(pipeline, 'table_one', TABLE_ONE_HEADER, rows)
    print(format_table(TABLE_ONE_HEADER, rows), end='')
    if stage_rows:
        _write_table(pipeline, 'stage_reports', STAGE_REPORT_COLUMNS, stage_rows)
        print(format_table(STAGE_REPORT_COLUMNS, stage_rows), end='')
    return f"Reported {total_all} logged trials from {len(urls)} ledger(s), {len(stage_rows)} stage report(s)"


COMMANDS = {
    'gen-scenes': gen_scenes,
    'collect': collect_trials,
    'pretrain': pretrain,
    'train': train_stage0,
    'stage': run_staged,
    'eval': evaluate,
    'bench': bench,
    'ablate': ablate,
    'rerank-demo': rerank_demo,
    'clutter': clutter,
    'report': report,
}
