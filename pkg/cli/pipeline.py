"""
Run-directory plumbing shared by the subcommands
A Pipeline owns one output directory, its patch store and its ledger, and
finds the artifacts of earlier runs passed with --from.
"""

import logging
import re
from functools import cached_property
from pathlib import Path

import numpy as np

from baselines.hog import HogConfig
from collector.dataset_io import load_dataset, save_dataset
from collector.trial_collector import CollectionConfig, Dataset, collect
from curriculum.staged_learning import StageConfig
from errors import ArtifactNotFoundError
from evaluation.experiment import ExperimentContext
from evaluation.test_set import build_test_set, test_set_from_records
from learner.checkpoint import load_network
from learner.network import ARCHITECTURES
from learner.training import TrainConfig
from patches.patch_pipeline import crop_side_px
from patches.patch_store import PatchStore
from simulator.models import GripperSpec, Workspace
from simulator.shape_library import make_shape_library, split_library
from storage.database import DatabaseManager, default_database_url

logger = logging.getLogger(__name__)

MODEL_PATTERN = re.compile(r'^model_stage(\d+)\.ckpt$')


class Pipeline:
    """Everything a subcommand needs: resolved config, run directory, earlier runs, ledger"""

    def __init__(self, run_config, out_dir, sources=(), command='', config_text=''):
        self.run_config = run_config
        self.out = Path(out_dir)
        self.sources = [Path(source) for source in sources]
        self.command = command
        self.seed = run_config.run.seed
        self.workers = run_config.run.workers
        self.store = PatchStore(self.out)
        self.db = DatabaseManager(default_database_url(self.out))
        self.db.create_tables()
        self.run_id = self.db.start_run(command, self.seed, config_text)

    # Domain objects

    @cached_property
    def workspace(self):
        section = self.run_config.workspace
        return Workspace(section.width_mm, section.height_mm, section.px_per_mm)

    @cached_property
    def gripper(self):
        section = self.run_config.gripper
        return GripperSpec(section.max_open_mm, section.min_close_mm, (section.jaw_length_mm, section.jaw_thickness_mm))

    @cached_property
    def split(self):
        section = self.run_config.library
        library = make_shape_library(section.seed, section.per_family)
        return split_library(library, section.novel_fraction, section.test_fraction, section.seed)

    @property
    def architecture(self):
        return ARCHITECTURES[self.run_config.model.architecture]

    def collection_config(self, n_trials=None):
        section = self.run_config.collection
        return CollectionConfig(
            n_trials=section.n_trials if n_trials is None else n_trials,
            objects_per_scene=section.objects_per_scene, refresh_min_objects=section.refresh_min_objects,
            max_trials_per_scene=section.max_trials_per_scene, shards=section.shards,
            remove_on_success=section.remove_on_success, workspace=self.workspace, gripper=self.gripper)

    def stage_config(self):
        section = self.run_config.stage
        return StageConfig(section.gamma, section.n_patches, section.trials_per_stage, section.novel_fraction,
                           section.floor, section.law, section.temperature, section.aggregate)

    def hog_config(self):
        return HogConfig(self.run_config.baselines.hog_cell, self.run_config.baselines.hog_bins)

    def context(self, test_set=None):
        train, pretrain = self.run_config.train, self.run_config.pretrain
        return ExperimentContext(
            split=self.split, store=self.store, collection=self.collection_config(),
            architecture=self.architecture, augment_copies=self.run_config.patches.augment_copies,
            bin_aligned=self.run_config.patches.bin_aligned,
            batch_size=train.batch_size, momentum=train.momentum,
            stage0_learning_rate=train.stage0_learning_rate, stage0_epochs=train.stage0_epochs,
            stagek_learning_rate=train.stagek_learning_rate, stagek_epochs=train.stagek_epochs,
            pretrain=TrainConfig(pretrain.learning_rate, pretrain.epochs, train.batch_size, train.momentum, self.seed),
            pretrain_samples=pretrain.samples, reinit_fc=pretrain.reinit_fc, test_set=test_set,
            workers=self.workers)

    # Artifacts

    def find(self, name):
        """Path of `name` in this run or the latest earlier run holding it, else None"""
        for directory in [self.out] + self.sources[::-1]:
            if (directory / name).exists():
                return directory / name
        return None

    def require(self, name, hint):
        path = self.find(name)
        if path is None:
            raise ArtifactNotFoundError(f"No {name} in {self.out} or --from directories; run `{hint}` first")
        return path

    def import_dataset(self, name):
        """
        Load a saved dataset and copy its patches into this run's store

        Returns:
            (Dataset, weights) or None when no directory holds `name`.csv
        """
        path = self.find(f"{name}.csv")
        if path is None:
            return None
        dataset, weights = load_dataset(path.parent, name)
        if path.parent != self.out:
            for record in dataset.records:
                self.store.put(record.patch_path, dataset.store.get(record.patch_path))
        logger.info(f"Imported {len(dataset)} records of {name} from {path.parent}")
        return Dataset(dataset.records, dataset.provenance, dataset.scenes, self.store), weights

    def random_dataset(self):
        """Random-trial dataset from an earlier run, or collected now"""
        imported = self.import_dataset('dataset')
        if imported is not None:
            return imported[0]
        dataset = collect(self.collection_config(), self.seed, list(self.split.seen), store=self.store,
                          workers=self.workers)
        save_dataset(dataset, self.out, 'dataset')
        self.db.log_trials(self.run_id, dataset.records, 'random')
        return dataset

    def staged_datasets(self):
        """Stage datasets saved by `stage`, in stage order"""
        datasets = []
        for stage in range(1, self.run_config.stage.n_stages + 1):
            imported = self.import_dataset(f"stage{stage}")
            if imported is None:
                break
            datasets.append(imported[0])
        return datasets

    @cached_property
    def test_set(self):
        """Frozen benchmark on the test shapes; collected once and reused through --from"""
        section = self.run_config.eval
        input_side = self.architecture.input_side
        imported = self.import_dataset('test')
        if imported is not None:
            dataset = imported[0]
            crop_side = crop_side_px(self.gripper, self.workspace)
            return test_set_from_records(dataset.records, self.store, crop_side, input_side, section.balance,
                                         self.seed + section.test_seed_offset, dataset.scenes, dataset.provenance)

        test_set = build_test_set(self.split.test, list(self.split.seen) + list(self.split.novel),
                                  section.test_interactions, section.balance, self.seed + section.test_seed_offset,
                                  self.collection_config(), self.store, input_side, self.workers)
        raw = Dataset(test_set.raw_records, test_set.provenance, test_set.scenes, self.store)
        save_dataset(raw, self.out, 'test')
        self.db.log_trials(self.run_id, raw.records, 'test')
        return test_set

    def latest_model(self, max_stage=None):
        """(stage, GraspNet) of the highest-numbered checkpoint, or None"""
        found = {}
        for directory in self.sources + [self.out]:
            if not directory.is_dir():
                continue
            for path in directory.iterdir():
                match = MODEL_PATTERN.match(path.name)
                if match:
                    found[int(match.group(1))] = path
        stages = [stage for stage in found if max_stage is None or stage <= max_stage]
        if not stages:
            return None
        stage = max(stages)
        return stage, load_network(found[stage])

    def model(self, stage, hint):
        return load_network(self.require(f"model_stage{stage}.ckpt", hint))

    def rng(self, *stream):
        return np.random.default_rng([self.seed, *stream])
