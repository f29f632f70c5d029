import numpy as np
import pytest

from collector.roi import occupied_components
from collector.trial_collector import CollectionConfig, Dataset, TrialRecord, collect, summarize
from conftest import SceneAware, SimulatorScorer
from curriculum.prior import ImportancePolicy, PriorMatrix, build_prior, cell_weights, importance_sample
from curriculum.staged_learning import StageConfig, aggregate, run_stage, run_stages
from learner.network import GraspNet
from learner.training import TrainConfig, train
from patches.patch_pipeline import bin_angle, crop_side_px
from patches.patch_store import PatchStore, build_training_arrays
from simulator.models import GraspConfig, GripperSpec
from simulator.render import render
from simulator.scene import generate_scene


def _record(index, stage=0, label=True):
    return TrialRecord(scene_id=f"s{index}", grasp=GraspConfig(1.0, 1.0, 0.0), label=label, stage=stage)


def test_proportional_weights_respect_the_floor():
    weights = cell_weights(np.array([[0.0, 0.5], [1e-5, 0.2]]), floor=1e-3)
    assert np.allclose(weights, [[1e-3, 0.5], [1e-3, 0.2]])


def test_rank_and_softmax_laws():
    entries = np.array([[0.1, 0.9], [0.5, 0.3]])
    assert np.array_equal(cell_weights(entries, law='rank'), [[1.0, 4.0], [3.0, 2.0]])
    softmax = cell_weights(entries, law='softmax', temperature=0.5)
    assert softmax.sum() == pytest.approx(1.0)
    assert np.argmax(softmax) == 1
    with pytest.raises(ValueError):
        cell_weights(entries, law='greedy')


def test_importance_sampling_frequencies_follow_the_prior():
    entries = np.zeros((3, 18))
    entries[0, 4] = 0.6
    entries[2, 11] = 0.3
    prior = PriorMatrix(entries=entries, centers_mm=np.zeros((3, 2)))
    rng = np.random.default_rng(0)
    counts = {}
    draws = 20000
    for _ in range(draws):
        cell = importance_sample(prior, rng, floor=1e-3)
        counts[cell] = counts.get(cell, 0) + 1

    weights = cell_weights(entries, floor=1e-3)
    total = weights.sum()
    assert counts[(0, 4)] / draws == pytest.approx(0.6 / total, abs=0.015)
    assert counts[(2, 11)] / draws == pytest.approx(0.3 / total, abs=0.015)
    assert all(0 <= i < 3 and 0 <= j < 18 for i, j in counts)


def test_prior_has_one_row_per_sampled_patch(small_workspace, library):
    scene = generate_scene(1, 3, library, small_workspace)
    image, occupancy = render(scene)
    calls = []

    def scorer(patches, centers):
        calls.append(patches.shape)
        return np.tile(np.linspace(0.0, 1.0, 18), (len(centers), 1))

    prior = build_prior(scorer, image, occupancy, small_workspace, np.random.default_rng(0), n_patches=12,
                        gripper=GripperSpec(), input_side=16)
    assert prior.shape == (12, 18)
    assert calls == [(12, 16, 16)]
    for x, y in prior.centers_mm:
        row, col = small_workspace.pixel_of(x, y)
        assert any(roi.contains_pixel(row, col) for roi in occupied_components(occupancy))


def test_importance_policy_executes_bin_centers(small_workspace, library):
    scene = generate_scene(1, 3, library, small_workspace)
    image, occupancy = render(scene)

    def scorer(patches, centers):
        scores = np.zeros((len(centers), 18))
        scores[:, 6] = 1.0
        return scores

    policy = ImportancePolicy(scorer, GripperSpec(), n_patches=8, floor=1e-9, input_side=16)
    rng = np.random.default_rng(3)
    proposal = policy.propose(scene, image, occupancy, rng)
    assert proposal.grasp.theta_deg == pytest.approx(65.0)
    assert proposal.score == 1.0
    assert policy.prior_for(scene, image, occupancy, rng) is policy.prior_for(scene, image, occupancy, rng)


def test_aggregation_replicates_new_records():
    previous = Dataset([_record(i) for i in range(3)])
    new = Dataset([_record(10 + i, stage=1) for i in range(2)])
    aggregated = aggregate(previous, new, gamma=3)

    assert len(aggregated) == 5
    assert aggregated.weights == [1, 1, 1, 3, 3]
    assert aggregated.effective_size == 9
    assert aggregated.stages == [0, 1]

    again = aggregate(aggregated, Dataset([_record(20, stage=2)]), gamma=2)
    assert again.weights == [1, 1, 1, 3, 3, 2]
    assert again.stages == [0, 1, 2]


def test_aggregation_rejects_gamma_below_one():
    with pytest.raises(ValueError):
        aggregate(Dataset(), Dataset(), gamma=0)


def test_stage_config_validation():
    with pytest.raises(ValueError):
        StageConfig(gamma=0)
    with pytest.raises(ValueError):
        StageConfig(novel_object_fraction=1.5)


@pytest.fixture
def stage_setup(small_workspace, split, tiny_architecture):
    store = PatchStore()
    collection = CollectionConfig(n_trials=24, objects_per_scene=3, refresh_min_objects=1, max_trials_per_scene=10,
                                  shards=2, workspace=small_workspace, gripper=GripperSpec())
    dataset0 = collect(collection, 0, list(split.seen), store=store)
    net0 = GraspNet(tiny_architecture, seed=0)
    arrays = build_training_arrays([(r, 1) for r in dataset0.records], store,
                                   crop_side_px(collection.gripper, small_workspace), 16, augment_copies=0)
    train(net0, arrays, [TrainConfig(0.01, 1, 8)])
    stage_config = StageConfig(gamma=3, n_patches=8, trials_per_stage=6, novel_object_fraction=0.5)
    return store, collection, dataset0, net0, stage_config


def test_stage_collects_aggregates_and_fine_tunes(stage_setup, split):
    store, collection, dataset0, net0, stage_config = stage_setup
    before = {name: value.copy() for name, value in net0.parameters().items()}

    result = run_stage(net0, 1, stage_config, dataset0, list(split.seen), list(split.novel), store, 0, collection,
                       benchmark=lambda net: 0.5, augment_copies=0,
                       schedule=[TrainConfig(0.01, 1, 8)])

    assert len(result.collected) == 6
    assert all(record.stage == 1 for record in result.collected.records)
    assert all(record.prior_score is not None for record in result.collected.records)
    assert result.aggregated.effective_size == len(dataset0) + 3 * 6
    assert result.report.stage == 1
    assert result.report.benchmark_accuracy == 0.5
    assert result.report.trials == 6
    assert len(result.curve) == 1
    assert result.net is not net0
    for name, value in net0.parameters().items():
        assert np.array_equal(value, before[name])


def test_stage_without_aggregation_trains_on_new_data_only(stage_setup, split):
    store, collection, dataset0, net0, stage_config = stage_setup
    new_only = StageConfig(3, 8, 6, 0.5, aggregate=False)
    result = run_stage(net0, 1, new_only, dataset0, list(split.seen), list(split.novel), store, 0, collection,
                       augment_copies=0, schedule=[TrainConfig(0.01, 1, 8)])
    assert result.report.effective_size == 6
    assert result.report.benchmark_accuracy is None


def test_stages_chain_their_datasets(stage_setup, split):
    store, collection, dataset0, net0, stage_config = stage_setup
    results = run_stages(net0, stage_config, dataset0, list(split.seen), list(split.novel), store, 0, n_stages=2,
                         collection=collection, augment_copies=0, schedule=[TrainConfig(0.01, 1, 8)])
    assert [result.report.stage for result in results] == [1, 2]
    assert results[1].aggregated.effective_size == len(dataset0) + 3 * 6 + 3 * 6
    assert results[1].aggregated.stages == [0, 1, 2]


def test_stage_zero_is_not_a_staged_round(stage_setup, split):
    store, collection, dataset0, net0, stage_config = stage_setup
    with pytest.raises(ValueError):
        run_stage(net0, 0, stage_config, dataset0, list(split.seen), list(split.novel), store, 0, collection)


def test_each_stage_fine_tunes_with_its_own_schedule(stage_setup, split):
    store, collection, dataset0, net0, stage_config = stage_setup
    requested = []

    def schedule_for(stage):
        requested.append(stage)
        return [TrainConfig(0.01, stage, 8)]

    results = run_stages(net0, stage_config, dataset0, list(split.seen), list(split.novel), store, 0, n_stages=2,
                         collection=collection, augment_copies=0, schedule=[TrainConfig(0.01, 5, 8)],
                         schedule_for=schedule_for)
    assert requested == [1, 2]
    assert [len(result.curve) for result in results] == [1, 2]


@pytest.fixture
def rate_collection(small_workspace):
    return CollectionConfig(n_trials=60, objects_per_scene=4, refresh_min_objects=1, max_trials_per_scene=20,
                            shards=2, workspace=small_workspace, gripper=GripperSpec())


def test_importance_sampling_at_least_doubles_the_random_grasp_rate(rate_collection, split):
    random = summarize(collect(rate_collection, 0, list(split.seen)).records)
    scorer = SimulatorScorer()
    policy = SceneAware(ImportancePolicy(scorer, n_patches=20, input_side=16), scorer)
    sampled = summarize(collect(rate_collection, 0, list(split.seen), policy=policy).records)

    assert sampled.total == random.total == 60
    assert sampled.grasp_rate >= 2 * random.grasp_rate
    assert sampled.grasp_rate > 0.5


def _bin_zero_scorer(patches, centers):
    scores = np.full((len(centers), 18), 0.05)
    scores[:, 0] = 0.9
    return scores


def test_staged_sampling_concentrates_hard_negatives(rate_collection, split):
    def hard_negative_density(records, score_of):
        return sum(1 for record in records if not record.label and score_of(record) > 0.5) / len(records)

    random = collect(rate_collection, 0, list(split.seen)).records
    policy = ImportancePolicy(_bin_zero_scorer, n_patches=10, input_side=16)
    sampled = collect(rate_collection, 0, list(split.seen), policy=policy).records

    random_density = hard_negative_density(random, lambda record: 0.9 if bin_angle(record.grasp.theta_deg).index == 0
                                           else 0.05)
    sampled_density = hard_negative_density(sampled, lambda record: record.prior_score)
    assert sampled_density > 2 * random_density
