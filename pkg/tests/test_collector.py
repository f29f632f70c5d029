import numpy as np
import pytest

from collector.dataset_io import load_dataset, save_dataset
from collector.roi import occupied_components, sample_grasp, sample_roi
from collector.trial_collector import CollectionConfig, RandomPolicy, collect, execute_trial, shard_sizes, summarize
from conftest import rectangle, scene_of
from errors import EmptyWorkspaceError
from patches.patch_store import PatchStore
from simulator.grasp_oracle import grasp_oracle
from simulator.models import GraspConfig, GripperSpec
from simulator.render import render
from simulator.scene import generate_scene


@pytest.fixture
def collection(small_workspace):
    return CollectionConfig(n_trials=40, objects_per_scene=3, refresh_min_objects=1, max_trials_per_scene=15,
                            shards=3, workspace=small_workspace, gripper=GripperSpec())


def test_components_are_found_in_scan_order():
    occupancy = np.zeros((20, 20), dtype=bool)
    occupancy[2:5, 3:9] = True
    occupancy[12:18, 10:12] = True
    first, second = occupied_components(occupancy)
    assert (first.row_min, first.col_min, first.height, first.width) == (2, 3, 3, 6)
    assert (second.row_min, second.col_min, second.height, second.width) == (12, 10, 6, 2)


def test_regions_are_picked_uniformly():
    occupancy = np.zeros((20, 20), dtype=bool)
    occupancy[1:3, 1:3] = True
    occupancy[10:19, 10:19] = True
    rng = np.random.default_rng(4)
    picks = [sample_roi(occupancy, rng).row_min for _ in range(4000)]
    assert abs(np.mean(np.array(picks) == 1) - 0.5) < 0.03


def test_empty_table_has_no_region():
    with pytest.raises(EmptyWorkspaceError):
        sample_roi(np.zeros((5, 5), dtype=bool), np.random.default_rng(0))


def test_sampled_grasp_lies_in_its_region(workspace):
    occupancy = np.zeros((200, 200), dtype=bool)
    occupancy[50:60, 70:90] = True
    rng = np.random.default_rng(1)
    roi = sample_roi(occupancy, rng)
    for _ in range(100):
        grasp = sample_grasp(roi, rng, workspace)
        row, col = workspace.pixel_of(grasp.x_mm, grasp.y_mm)
        assert roi.contains_pixel(row, col)
        assert 0.0 <= grasp.theta_deg < 180.0


def test_execute_trial_removes_the_grasped_object(workspace, gripper):
    scene = scene_of(workspace, (rectangle(60, 45), 60.0, 60.0, 0.0), (rectangle(40, 40), 150.0, 150.0, 0.0))
    store = PatchStore()
    trial = execute_trial(scene, GraspConfig(60.0, 60.0, 90.0), gripper, stage=0, scene_id='x-00', store=store)

    assert trial.record.label
    assert trial.record.object_id == 0
    assert trial.scene_after.object_ids == [1]
    assert trial.record.patch_path in store

    miss = execute_trial(trial.scene_after, GraspConfig(10.0, 10.0, 0.0), gripper, stage=0)
    assert not miss.record.label
    assert miss.record.failure_reason == 'no_contact'
    assert miss.scene_after is trial.scene_after


def test_shard_sizes_cover_the_budget():
    assert shard_sizes(10, 4) == [3, 3, 2, 2]
    assert sum(shard_sizes(7, 3)) == 7


def test_collect_does_not_depend_on_worker_count(collection, library):
    serial = collect(collection, 5, library, store=PatchStore(), workers=1)
    threaded = collect(collection, 5, library, store=PatchStore(), workers=3)

    assert len(serial) == 40
    assert serial.records == threaded.records
    for record in serial.records:
        assert np.array_equal(serial.store.get(record.patch_path), threaded.store.get(record.patch_path))


def test_recorded_scenes_replay_to_the_recorded_labels(collection, library):
    dataset = collect(collection, 9, library, store=PatchStore())
    for record in dataset.records:
        outcome = grasp_oracle(dataset.scenes[record.scene_id], record.grasp, collection.gripper)
        assert outcome.success == record.label


def test_random_policy_proposes_grasps_on_objects(small_workspace, library):
    scene = generate_scene(2, 3, library, small_workspace)
    image, occupancy = render(scene)
    rng = np.random.default_rng(0)
    for _ in range(20):
        grasp = RandomPolicy().propose(scene, image, occupancy, rng).grasp
        assert small_workspace.contains(grasp.x_mm, grasp.y_mm)


def test_summarize_counts_by_stage(collection, library):
    dataset = collect(collection, 1, library, store=PatchStore())
    stats = summarize(dataset)
    assert stats.total == 40
    assert stats.positives + stats.negatives == 40
    assert stats.grasp_rate == pytest.approx(stats.positives / 40)
    assert summarize(dataset, stage=3).grasp_rate is None


def test_saved_dataset_reloads_records_scenes_and_patches(tmp_path, collection, library):
    store = PatchStore(tmp_path)
    dataset = collect(collection, 2, library, store=store)
    save_dataset(dataset, tmp_path, 'dataset', weights=[2] * len(dataset))

    reloaded, weights = load_dataset(tmp_path, 'dataset')
    assert weights == [2] * len(dataset)
    assert [(r.scene_id, r.grasp, r.label, r.patch_path) for r in reloaded.records] == \
        [(r.scene_id, r.grasp, r.label, r.patch_path) for r in dataset.records]
    assert reloaded.provenance['seed'] == 2
    first = dataset.records[0]
    assert np.array_equal(reloaded.store.get(first.patch_path), store.get(first.patch_path))
    outcome = grasp_oracle(reloaded.scenes[first.scene_id], first.grasp, collection.gripper)
    assert outcome.success == first.label
