"""
Shared experiment plumbing: the frozen benchmark, stage-0 training with or
without pretraining, and the baseline methods trained on the same data.
"""

import logging
from dataclasses import dataclass, field

import config
from baselines.heuristic import HeuristicParams, default_params, heuristic_features, optimistic_param_select
from baselines.hog import HogConfig, hog_batch
from baselines.knn import KnnModel, sweep_k
from baselines.svm import svm_train
from collector.trial_collector import CollectionConfig
from curriculum.prior import NetScorer
from evaluation.metrics import HeuristicPredictor, KnnPredictor, ScorerPredictor, SvmPredictor, accuracy
from learner.network import ARCHITECTURES, GraspNet
from learner.pretrain import build_shape_dataset, pretrain_features
from learner.training import TrainConfig, train
from patches.patch_pipeline import crop_side_px
from patches.patch_store import build_training_arrays

logger = logging.getLogger(__name__)

METHOD_ORDER = ('Min eigenvalue', 'Eigenvalue limit', 'Optimistic param. select', 'Optimistic kNN', 'SVM',
                'Deep Net', 'Deep Net + Multi-stage')


@dataclass
class ExperimentContext:
    """Everything a training or evaluation routine needs besides the data itself"""
    split: object  # LibrarySplit
    store: object  # PatchStore
    collection: CollectionConfig = field(default_factory=CollectionConfig)
    architecture: object = field(default_factory=lambda: ARCHITECTURES['desk'])
    augment_copies: int = config.AUGMENT_COPIES
    bin_aligned: bool = config.AUGMENT_BIN_ALIGNED
    batch_size: int = config.BATCH_SIZE
    momentum: float = config.MOMENTUM
    stage0_learning_rate: float = config.STAGE0_LEARNING_RATE
    stage0_epochs: int = config.STAGE0_EPOCHS
    stagek_learning_rate: float = config.STAGEK_LEARNING_RATE
    stagek_epochs: int = config.STAGEK_EPOCHS
    pretrain: TrainConfig = field(default_factory=lambda: TrainConfig(config.PRETRAIN_LEARNING_RATE,
                                                                      config.PRETRAIN_EPOCHS))
    pretrain_samples: int = config.PRETRAIN_SAMPLES
    reinit_fc: bool = False
    test_set: object = None
    workers: int = 1

    @property
    def gripper(self):
        return self.collection.gripper

    @property
    def workspace(self):
        return self.collection.workspace

    @property
    def crop_side(self):
        return crop_side_px(self.gripper, self.workspace)

    @property
    def patch_px_per_mm(self):
        return self.workspace.px_per_mm * self.architecture.input_side / self.crop_side

    def training_arrays(self, entries, seed):
        return build_training_arrays(entries, self.store, self.crop_side, self.architecture.input_side,
                                     self.augment_copies, seed=seed, bin_aligned=self.bin_aligned)

    def evaluate(self, net):
        """Accuracy of a network on the frozen test set"""
        return accuracy(ScorerPredictor(NetScorer(net)), self.test_set).accuracy


def pretrained_net(context, seed):
    """Fresh network whose trunk was trained on shape-family classification of the seen shapes"""
    net = GraspNet(context.architecture, seed=seed)
    aux = build_shape_dataset(list(context.split.seen), context.pretrain_samples, seed, context.crop_side,
                              context.architecture.input_side, context.workspace.px_per_mm)
    pretrain_config = TrainConfig(context.pretrain.learning_rate, context.pretrain.epochs, context.batch_size,
                                  context.momentum, seed)
    report = pretrain_features(net, aux, pretrain_config, reinit_fc=context.reinit_fc)
    return net, report


def train_stage0(context, dataset, seed, pretrained=True):
    """
    Stage-0 model: optional pretraining, then lr 0.01 for 20 epochs on random trials

    Returns:
        (GraspNet, TrainResult)
    """
    if pretrained:
        net, _ = pretrained_net(context, seed)
    else:
        net = GraspNet(context.architecture, seed=seed)
    arrays = context.training_arrays([(record, 1) for record in dataset.records], seed)
    schedule = [TrainConfig(context.stage0_learning_rate, context.stage0_epochs, context.batch_size,
                            context.momentum, seed)]
    return net, train(net, arrays, schedule, workers=context.workers)


def stagek_schedule(context, stage, seed):
    """Fine-tuning schedule of stage k >= 1; shuffles with seed + stage"""
    return [TrainConfig(context.stagek_learning_rate, context.stagek_epochs, context.batch_size, context.momentum,
                        seed + stage)]


def baseline_methods(context, arrays, test_set, seed=0, hog_config=None, k_grid=config.KNN_K_GRID,
                     c_grid=config.SVM_C_GRID, svm_epochs=config.SVM_EPOCHS,
                     validation_fraction=config.SVM_VALIDATION_FRACTION,
                     thresholds=config.HEURISTIC_THRESHOLD_GRID, limits=config.HEURISTIC_LIMIT_GRID_PX):
    """
    Heuristic variants, kNN and SVM, with the optimistic selections done on the test set

    Returns:
        Ordered {method name: predictor}
    """
    hog_config = hog_config or HogConfig()
    background = config.BACKGROUND_LEVEL
    methods = {
        'Min eigenvalue': HeuristicPredictor(HeuristicParams(config.HEURISTIC_DEFAULT_THRESHOLD_DEG, 0.0), background),
        'Eigenvalue limit': HeuristicPredictor(default_params(context.gripper, context.patch_px_per_mm), background),
    }
    features = [heuristic_features(pixels, background) for pixels in test_set.patches]
    best_params, _ = optimistic_param_select(features, test_set.thetas, test_set.labels, thresholds, limits)
    methods['Optimistic param. select'] = HeuristicPredictor(best_params, background)

    descriptors = hog_batch(arrays.patches, hog_config)
    knn = KnnModel.fit(descriptors, arrays.bins, arrays.labels)
    best_k, _, _ = sweep_k(knn, hog_batch(test_set.patches, hog_config), test_set.bins, test_set.labels, k_grid)
    methods['Optimistic kNN'] = KnnPredictor(knn, best_k, hog_config)

    svm = svm_train(descriptors, arrays.bins, arrays.labels, c_grid, validation_fraction, svm_epochs, seed)
    methods['SVM'] = SvmPredictor(svm, hog_config)
    return methods
