import copy
import math

import numpy as np
import pytest

from errors import BinOutOfRangeError, CheckpointFormatError, ShapeMismatchError
from learner.checkpoint import load_network, save_network, write_container
from learner.loss import masked_cross_entropy
from learner.network import GraspNet
from learner.pretrain import build_shape_dataset, pretrain_features
from learner.training import SGD, TrainConfig, backward_and_step, batch_gradients, train
from patches.patch_store import TrainingArrays


def _batch(rng, n, side=16):
    x = rng.uniform(0.0, 1.0, size=(n, 1, side, side))
    bins = rng.integers(0, 18, size=n)
    labels = rng.integers(0, 2, size=n)
    return x, bins, labels


def _arrays(rng, n, side=16):
    x, bins, labels = _batch(rng, n, side)
    return TrainingArrays(x.astype(np.float32), bins, labels, np.ones(n, dtype=np.int64), np.arange(n))


def test_zero_logits_cost_ln2_per_sample():
    report, _ = masked_cross_entropy(np.zeros((4, 18, 2)), [0, 5, 9, 17], [1, 0, 1, 0])
    assert report.total == pytest.approx(4 * math.log(2.0))
    assert report.mean == pytest.approx(math.log(2.0))


def test_loss_is_additive_over_samples(rng):
    logits = rng.normal(size=(6, 18, 2))
    bins, labels = rng.integers(0, 18, size=6), rng.integers(0, 2, size=6)
    whole, _ = masked_cross_entropy(logits, bins, labels)
    first, _ = masked_cross_entropy(logits[:2], bins[:2], labels[:2])
    rest, _ = masked_cross_entropy(logits[2:], bins[2:], labels[2:])
    assert whole.total == pytest.approx(first.total + rest.total)


def test_other_heads_get_no_gradient(rng):
    logits = rng.normal(size=(3, 18, 2))
    _, dlogits = masked_cross_entropy(logits, [2, 2, 7], [0, 1, 1])
    touched = np.zeros((3, 18), dtype=bool)
    touched[[0, 1, 2], [2, 2, 7]] = True
    assert np.all(dlogits[~touched] == 0.0)
    assert np.allclose(dlogits[touched].sum(axis=1), 0.0)


def test_out_of_range_bin_is_rejected():
    with pytest.raises(BinOutOfRangeError):
        masked_cross_entropy(np.zeros((1, 18, 2)), [18], [1])


def test_input_shape_is_checked(tiny_architecture):
    net = GraspNet(tiny_architecture)
    with pytest.raises(ShapeMismatchError):
        net.forward(np.zeros((2, 1, 12, 12)))


def test_backward_matches_finite_differences(tiny_architecture, rng):
    net = GraspNet(tiny_architecture, seed=3)
    for name, value in net.parameters().items():
        if name.startswith('heads.'):
            value[...] = rng.normal(0.0, 0.5, size=value.shape)
    x, bins, labels = _batch(rng, 4)
    logits, cache = net.forward(x)
    _, dlogits = masked_cross_entropy(logits, bins, labels)
    grads = net.backward(dlogits, cache)

    def total():
        return masked_cross_entropy(net.forward(x)[0], bins, labels)[0].total

    eps = 1e-6
    checked = 0
    for name, param in net.parameters().items():
        for flat in rng.choice(param.size, size=min(17, param.size), replace=False):
            index = np.unravel_index(flat, param.shape)
            saved = param[index]
            param[index] = saved + eps
            up = total()
            param[index] = saved - eps
            down = total()
            param[index] = saved
            numeric = (up - down) / (2 * eps)
            assert grads[name][index] == pytest.approx(numeric, rel=1e-4, abs=1e-7), name
            checked += 1
    assert checked >= 100


def test_zero_learning_rate_leaves_parameters_unchanged(tiny_architecture, rng):
    net = GraspNet(tiny_architecture, seed=1)
    before = copy.deepcopy(net.parameters())
    backward_and_step(net, _batch(rng, 8), TrainConfig(learning_rate=0.0, epochs=1, batch_size=8))
    for name, value in net.parameters().items():
        assert np.array_equal(value, before[name])


def test_momentum_accumulates_velocity():
    params = {'w': np.array([1.0])}
    optimizer = SGD(learning_rate=0.1, momentum=0.5)
    optimizer.step(params, {'w': np.array([1.0])})
    optimizer.step(params, {'w': np.array([1.0])})
    assert params['w'][0] == pytest.approx(1.0 - 0.1 - 0.15)


def test_gradients_do_not_depend_on_worker_count(tiny_architecture, rng):
    net = GraspNet(tiny_architecture, seed=2)
    x, bins, labels = _batch(rng, 10)
    serial = batch_gradients(net, x, bins, labels, workers=1)
    threaded = batch_gradients(net, x, bins, labels, workers=4)
    assert serial[0] == threaded[0]
    for name in serial[2]:
        assert np.array_equal(serial[2][name], threaded[2][name])


def test_training_is_reproducible_across_worker_counts(tiny_architecture):
    arrays = _arrays(np.random.default_rng(5), 24)
    schedule = [TrainConfig(learning_rate=0.05, epochs=2, batch_size=8, seed=4)]
    first, second = GraspNet(tiny_architecture, seed=0), GraspNet(tiny_architecture, seed=0)
    train(first, arrays, schedule, workers=1)
    train(second, arrays, schedule, workers=3)
    for name, value in first.parameters().items():
        assert np.array_equal(value, second.parameters()[name])


def test_repeated_steps_reduce_the_loss_on_a_fixed_batch(tiny_architecture, rng):
    net = GraspNet(tiny_architecture, seed=0)
    batch = _batch(rng, 16)
    train_config = TrainConfig(learning_rate=0.05, epochs=1, batch_size=16, momentum=0.9)
    optimizer = SGD(train_config.learning_rate, train_config.momentum)
    first, _ = backward_and_step(net, batch, train_config, optimizer)
    for _ in range(60):
        last, _ = backward_and_step(net, batch, train_config, optimizer)
    assert last < first


def test_replication_weights_repeat_rows_within_an_epoch(tiny_architecture):
    arrays = _arrays(np.random.default_rng(6), 5)
    arrays.weights = np.array([1, 1, 1, 1, 3])
    result = train(GraspNet(tiny_architecture), arrays, [TrainConfig(0.01, 1, 4)])
    assert len(result.curve) == 1
    assert np.isfinite(result.final_loss)


def test_empty_training_set_is_rejected(tiny_architecture):
    empty = TrainingArrays(np.zeros((0, 1, 16, 16), dtype=np.float32), np.zeros(0, dtype=np.int64),
                           np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    with pytest.raises(ValueError):
        train(GraspNet(tiny_architecture), empty, [TrainConfig()])


def test_checkpoint_restores_identical_scores(tmp_path, tiny_architecture, rng):
    net = GraspNet(tiny_architecture, seed=8)
    train(net, _arrays(rng, 8), [TrainConfig(0.05, 1, 4)])
    save_network(tmp_path / 'model.ckpt', net)
    restored = load_network(tmp_path / 'model.ckpt')
    x = rng.uniform(size=(3, 1, 16, 16))
    assert np.array_equal(net.scores(x), restored.scores(x))


def test_checkpoint_format_errors(tmp_path, tiny_architecture):
    (tmp_path / 'junk.ckpt').write_bytes(b'not a checkpoint at all')
    with pytest.raises(CheckpointFormatError):
        load_network(tmp_path / 'junk.ckpt')

    write_container(tmp_path / 'knn.ckpt', 'knn', {'k': 1}, {'x': np.zeros(2)})
    with pytest.raises(CheckpointFormatError):
        load_network(tmp_path / 'knn.ckpt')

    save_network(tmp_path / 'model.ckpt', GraspNet(tiny_architecture))
    raw = (tmp_path / 'model.ckpt').read_bytes()
    (tmp_path / 'cut.ckpt').write_bytes(raw[:-16])
    with pytest.raises(CheckpointFormatError):
        load_network(tmp_path / 'cut.ckpt')


def test_scores_are_probabilities_per_bin(tiny_architecture, rng):
    scores = GraspNet(tiny_architecture).scores(rng.uniform(size=(5, 1, 16, 16)))
    assert scores.shape == (5, 18)
    assert np.all((scores > 0.0) & (scores < 1.0))


def test_pretraining_without_epochs_is_training_from_scratch(tiny_architecture, library):
    aux = build_shape_dataset(library, 6, seed=0, crop_side=64, input_side=16, px_per_mm=0.5)
    net = GraspNet(tiny_architecture, seed=4)
    pretrain_features(net, aux, TrainConfig(0.01, 0, 4))
    fresh = GraspNet(tiny_architecture, seed=4)
    for name, value in net.parameters().items():
        assert np.array_equal(value, fresh.parameters()[name])


def test_pretraining_changes_the_trunk_and_resets_the_heads(tiny_architecture, library):
    aux = build_shape_dataset(library, 16, seed=0, crop_side=64, input_side=16, px_per_mm=0.5)
    assert aux.patches.shape == (16, 1, 16, 16)
    net = GraspNet(tiny_architecture, seed=4)
    report = pretrain_features(net, aux, TrainConfig(0.05, 2, 8))
    fresh = GraspNet(tiny_architecture, seed=4)

    assert len(report.curve) == 2
    assert not np.array_equal(net.parameters()['conv0.weight'], fresh.parameters()['conv0.weight'])
    assert np.array_equal(net.head_weight, fresh.head_weight)
    assert np.array_equal(net.head_bias, fresh.head_bias)
