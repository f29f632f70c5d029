import numpy as np
import pytest

from baselines.heuristic import (HeuristicParams, angle_error, eig_sym2, heuristic_features, heuristic_predict,
                                 optimistic_param_select)
from baselines.hog import HogConfig, hog, hog_batch
from baselines.knn import KnnModel, knn_predict, knn_predict_batch, load_knn, save_knn, sweep_k
from baselines.svm import fit_linear_svm, load_svm, save_svm, svm_predict, svm_predict_batch, svm_train
from errors import ShapeMismatchError


def _bar_patch(side=48, rows=(20, 28), cols=(4, 44), level=0.3):
    """Horizontal bar on the table background"""
    pixels = np.full((side, side), 0.92)
    pixels[rows[0]:rows[1], cols[0]:cols[1]] = level
    return pixels


def test_eigen_decomposition_of_a_diagonal_matrix():
    small, large, v_small, v_large = eig_sym2(2.0, 0.0, 1.0)
    assert (small, large) == pytest.approx((1.0, 2.0))
    assert abs(v_small[1]) == pytest.approx(1.0)
    assert abs(v_large[0]) == pytest.approx(1.0)


def test_eigen_decomposition_matches_numpy(rng):
    for _ in range(20):
        a, b, c = rng.normal(size=3)
        small, large, v_small, _ = eig_sym2(a, b, c)
        values, vectors = np.linalg.eigh(np.array([[a, b], [b, c]]))
        assert (small, large) == pytest.approx(tuple(values))
        assert abs(float(v_small @ vectors[:, 0])) == pytest.approx(1.0)


def test_isotropic_blob_gives_the_x_axis():
    small, large, v_small, _ = eig_sym2(1.0, 0.0, 1.0)
    assert small == large
    assert np.array_equal(v_small, [1.0, 0.0])


def test_heuristic_grasps_across_the_bar():
    features = heuristic_features(_bar_patch())
    assert features.valid
    assert angle_error(features.angle_deg, 90.0) < 1e-6
    assert features.lambda_large > features.lambda_small

    params = HeuristicParams(angle_error_threshold_deg=15.0)
    assert heuristic_predict(_bar_patch(), 90.0, params)
    assert heuristic_predict(_bar_patch(), 80.0, params)
    assert not heuristic_predict(_bar_patch(), 0.0, params)


def test_heuristic_vetoes_small_objects():
    pixels = _bar_patch(rows=(22, 26), cols=(20, 28))
    assert not heuristic_predict(pixels, 90.0, HeuristicParams(15.0, eigenvalue_limit=20.0))
    assert heuristic_predict(pixels, 90.0, HeuristicParams(15.0, eigenvalue_limit=0.0))


def test_heuristic_needs_foreground_at_the_center():
    pixels = _bar_patch(rows=(2, 6))
    assert not heuristic_features(pixels).valid
    assert not heuristic_predict(pixels, 90.0, HeuristicParams())


def test_optimistic_selection_finds_the_separating_threshold():
    features = [heuristic_features(_bar_patch())] * 4
    thetas = [90.0, 95.0, 60.0, 20.0]
    labels = [1, 1, 0, 0]
    params, accuracy = optimistic_param_select(features, thetas, labels, thresholds=(45.0, 10.0), limits=(0.0,))
    assert params.angle_error_threshold_deg == 10.0
    assert accuracy == 1.0


def test_hog_length_and_uniform_patch():
    hog_config = HogConfig()
    assert hog_config.length(48) == 900
    descriptor = hog(np.full((48, 48), 0.5), hog_config)
    assert descriptor.shape == (900,)
    assert np.allclose(descriptor, 0.0)


def test_hog_tells_orientations_apart():
    horizontal = np.full((48, 48), 0.9)
    horizontal[::8, :] = 0.1
    vertical = horizontal.T.copy()
    batch = hog_batch(np.stack([horizontal, vertical]))
    assert batch.shape == (2, 900)
    assert not np.allclose(batch[0], batch[1])
    assert np.allclose(hog(horizontal), batch[0])


def test_hog_rejects_sides_not_divisible_by_the_cell():
    with pytest.raises(ShapeMismatchError):
        hog(np.zeros((50, 50)))


def test_knn_only_compares_within_the_bin():
    model = KnnModel.fit(np.array([[0.0], [1.0], [10.0], [0.0]]), np.array([0, 0, 0, 5]), np.array([1, 1, 0, 0]))
    assert knn_predict(model, [0.4], 0, k=1) == 1
    assert knn_predict(model, [0.4], 0, k=3) == 1
    assert knn_predict(model, [9.0], 0, k=1) == 0
    assert knn_predict(model, [0.4], 5, k=1) == 0
    assert knn_predict(model, [0.4], 9, k=1) == 0


def test_knn_ties_vote_for_failure():
    model = KnnModel.fit(np.array([[0.0], [10.0]]), np.array([3, 3]), np.array([1, 0]))
    assert knn_predict(model, [5.0], 3, k=2) == 0


def test_knn_batch_agrees_with_brute_force(rng):
    descriptors, bins, labels = rng.normal(size=(60, 4)), rng.integers(0, 3, size=60), rng.integers(0, 2, size=60)
    model = KnnModel.fit(descriptors, bins, labels, k=3)
    queries, query_bins = rng.normal(size=(15, 4)), rng.integers(0, 3, size=15)
    expected = []
    for query, bin_index in zip(queries, query_bins):
        same = np.nonzero(bins == bin_index)[0]
        nearest = same[np.argsort(np.linalg.norm(descriptors[same] - query, axis=1), kind='stable')[:3]]
        expected.append(int(2 * labels[nearest].sum() > len(nearest)))
    assert list(knn_predict_batch(model, queries, query_bins)) == expected


def test_knn_sweep_prefers_the_first_best_k(rng):
    descriptors, labels = rng.normal(size=(30, 2)), rng.integers(0, 2, size=30)
    bins = np.zeros(30, dtype=np.int64)
    model = KnnModel.fit(descriptors, bins, labels)
    best_k, best, accuracies = sweep_k(model, descriptors, bins, labels, k_grid=(1, 3))
    assert best_k == 1
    assert best == accuracies[1] == 1.0


def test_knn_model_survives_a_save(tmp_path, rng):
    model = KnnModel.fit(rng.normal(size=(10, 3)), rng.integers(0, 18, size=10), rng.integers(0, 2, size=10), k=3)
    save_knn(tmp_path / 'knn.ckpt', model)
    restored = load_knn(tmp_path / 'knn.ckpt')
    queries, bins = rng.normal(size=(8, 3)), rng.integers(0, 18, size=8)
    assert restored.k == 3
    assert np.array_equal(knn_predict_batch(model, queries, bins), knn_predict_batch(restored, queries, bins))


def _separable(rng, n=20):
    magnitude = rng.uniform(1.0, 3.0, size=n)
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    x = np.column_stack([sign * magnitude, rng.normal(0.0, 0.3, size=n)])
    return x, sign


def test_svm_separates_separable_data(rng):
    x, y = _separable(rng)
    model = fit_linear_svm(x, y, c=10.0, epochs=200)
    assert np.all(np.sign(x @ model.weight + model.bias) == y)


def test_svm_objective_never_increases(rng):
    x, y = rng.normal(size=(40, 3)), np.where(rng.random(40) < 0.5, 1.0, -1.0)
    curve = fit_linear_svm(x, y, c=1.0, epochs=50).objective_curve
    assert len(curve) == 51
    assert all(later <= earlier for earlier, later in zip(curve, curve[1:]))


def test_svm_train_uses_majority_for_single_class_bins(rng):
    x, y = _separable(rng)
    descriptors = np.vstack([x, rng.normal(size=(3, 2))])
    bins = np.array([2] * len(y) + [7, 7, 7])
    labels = np.concatenate([(y > 0).astype(int), [1, 1, 1]])
    model = svm_train(descriptors, bins, labels, c_grid=(1.0, 10.0), epochs=100, seed=0)

    assert model.degenerate[7] and model.degenerate[0]
    assert not model.degenerate[2]
    assert svm_predict(model, [0.0, 0.0], 7) == 1
    assert svm_predict(model, [0.0, 0.0], 0) == 0
    assert np.array_equal(svm_predict_batch(model, x, np.full(len(y), 2)), (y > 0).astype(int))


def test_svm_model_survives_a_save(tmp_path, rng):
    x, y = _separable(rng)
    model = svm_train(x, np.full(len(y), 4), (y > 0).astype(int), c_grid=(1.0,), epochs=50)
    save_svm(tmp_path / 'svm.ckpt', model)
    restored = load_svm(tmp_path / 'svm.ckpt')
    assert restored.degenerate == model.degenerate
    assert restored.c_values[4] == 1.0 and restored.c_values[0] is None
    assert np.array_equal(svm_predict_batch(model, x, np.full(len(y), 4)),
                          svm_predict_batch(restored, x, np.full(len(y), 4)))
