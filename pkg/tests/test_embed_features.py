import numpy as np
import pytest
from sklearn.metrics import confusion_matrix

from dfm_errors import ParameterError
from embed_features import (
    KernelBackend,
    crossfit_predictions,
    embed_means,
    kernel_mean,
    kernel_problem,
    onehot_from_predictions,
    rff_for_sigma,
    rff_sample,
    tree_sum,
    user_features,
)
from load_dataset import SourceDataset, TargetDataset
from random_streams import RngStream


def gaussian_kernel(x, y, sigma):
    return np.exp(-np.sum((x - y) ** 2, axis=-1) / (2.0 * sigma ** 2))


# ============================================
# Random Fourier features
# ============================================

def test_cos_sin_features_have_unit_norm(rng):
    emb = rff_sample(d=4, D=256, sigma=1.3, rng=rng)
    x = rng.child(1).normal(scale=5.0, size=(1000, 4))
    norms = np.linalg.norm(emb.transform(x), axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-12


def test_identical_points_have_unit_similarity(rng):
    emb = rff_sample(d=3, D=64, sigma=0.5, rng=rng)
    x = np.array([[0.3, -1.0, 2.0]])
    assert float(emb.transform(x) @ emb.transform(x).T) == pytest.approx(1.0, abs=1e-12)


def test_rff_approximates_gaussian_kernel(rng):
    sigma = 1.0
    emb = rff_sample(d=3, D=2048, sigma=sigma, rng=rng)
    x = rng.child(1).normal(size=(1000, 3))
    y = x + rng.child(2).normal(scale=0.8, size=(1000, 3))
    approx = np.sum(emb.transform(x) * emb.transform(y), axis=1)
    errors = np.abs(approx - gaussian_kernel(x, y, sigma))
    assert np.mean(errors <= 0.1) >= 0.99


def test_rff_is_unbiased_over_draws():
    x = np.array([[0.0, 0.5]])
    y = np.array([[1.0, -0.5]])
    sigma = 1.2
    master = RngStream(seed=3)
    # 400 draws of D=256 is 10^5 frequency samples
    values = []
    for i in range(400):
        emb = rff_sample(d=2, D=256, sigma=sigma, rng=master.child(i))
        values.append(float(emb.transform(x) @ emb.transform(y).T))
    assert np.mean(values) == pytest.approx(float(gaussian_kernel(x, y, sigma)), abs=0.01)


def test_cos_shift_variant_approximates_kernel(rng):
    emb = rff_sample(d=2, D=8192, sigma=1.0, rng=rng, variant="cos-shift")
    x = np.array([[0.0, 0.0]])
    y = np.array([[0.7, 0.2]])
    value = float(emb.transform(x) @ emb.transform(y).T)
    assert value == pytest.approx(float(gaussian_kernel(x, y, 1.0)), abs=0.05)


@pytest.mark.parametrize("kwargs", [dict(D=7), dict(sigma=0.0), dict(variant="cos-only")])
def test_rff_parameter_errors(rng, kwargs):
    args = dict(d=2, D=8, sigma=1.0, rng=rng)
    args.update(kwargs)
    with pytest.raises(ParameterError):
        rff_sample(**args)


def test_per_sigma_draw_is_reproducible():
    a = rff_for_sigma(3, 16, 0.75, RngStream(seed=9))
    b = rff_for_sigma(3, 16, 0.75, RngStream(seed=9))
    np.testing.assert_array_equal(a.omega, b.omega)


# ============================================
# Mean embeddings
# ============================================

def test_single_point_embeddings(rng):
    x = np.array([[0.4, -0.2]])
    src = SourceDataset(points=x, labels=np.array([0]), n_classes=1)
    emb = rff_sample(d=2, D=32, sigma=1.0, rng=rng)

    ce = embed_means(emb, src, TargetDataset(x))
    np.testing.assert_allclose(ce.phi[0], emb.transform(x)[0])
    np.testing.assert_allclose(ce.phi_target, emb.transform(x)[0])

    doubled = embed_means(emb, src, TargetDataset(np.vstack([x, x])))
    np.testing.assert_allclose(doubled.phi_target, ce.phi_target)


def test_embeddings_match_direct_means(three_class_pair, rng):
    src, tgt, _ = three_class_pair
    emb = rff_sample(d=src.d, D=128, sigma=2.0, rng=rng)
    ce = embed_means(emb, src, tgt, block_rows=100)

    features = emb.transform(src.points)
    for i in range(src.n_classes):
        np.testing.assert_allclose(ce.phi[i], features[src.labels == i].mean(axis=0),
                                   atol=1e-12)
    np.testing.assert_allclose(ce.phi_target, emb.transform(tgt.points).mean(axis=0),
                               atol=1e-12)
    assert ce.bound == pytest.approx(1.0)
    np.testing.assert_array_equal(ce.counts, src.counts)


def test_embeddings_do_not_depend_on_worker_count(three_class_pair, rng):
    src, tgt, _ = three_class_pair
    emb = rff_sample(d=src.d, D=64, sigma=2.0, rng=rng)
    one = embed_means(emb, src, tgt, block_rows=64, n_jobs=1)
    four = embed_means(emb, src, tgt, block_rows=64, n_jobs=4)
    np.testing.assert_array_equal(one.phi, four.phi)
    np.testing.assert_array_equal(one.phi_target, four.phi_target)


def test_dimension_mismatch(rng, three_class_pair):
    src, tgt, _ = three_class_pair
    emb = rff_sample(d=src.d + 1, D=16, sigma=1.0, rng=rng)
    with pytest.raises(ParameterError):
        embed_means(emb, src, tgt)


def test_tree_sum_is_order_fixed():
    parts = [np.float64(v) for v in (1e16, 1.0, -1e16, 1.0)]
    assert tree_sum(parts) == (1e16 + 1.0) + (-1e16 + 1.0)
    with pytest.raises(ParameterError):
        tree_sum([])


# ============================================
# One-hot (BBSE) embeddings
# ============================================

def test_perfect_classifier_gives_basis_vectors():
    labels = np.array([0, 1, 2, 0, 1, 2])
    src = SourceDataset(points=np.zeros((6, 1)), labels=labels, n_classes=3)
    tgt = TargetDataset(np.zeros((4, 1)))
    emb = onehot_from_predictions(labels + 1, [1, 1, 2, 3], 3)

    ce = embed_means(emb, src, tgt)
    np.testing.assert_array_equal(ce.phi, np.eye(3))
    np.testing.assert_allclose(ce.phi_target, [0.5, 0.25, 0.25])
    np.testing.assert_array_equal(ce.gram().dense, np.eye(3))


def test_class_means_are_confusion_columns():
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1, 2], 40)
    preds = rng.integers(1, 4, size=labels.shape[0])
    src = SourceDataset(points=np.zeros((labels.shape[0], 1)), labels=labels, n_classes=3)
    ce = embed_means(onehot_from_predictions(preds, [1], 3), src, TargetDataset(np.zeros((1, 1))))

    # rows: true class, columns: prediction
    table = confusion_matrix(labels + 1, preds, labels=[1, 2, 3])
    np.testing.assert_allclose(ce.phi, table / 40, atol=1e-15)


def test_prediction_out_of_range():
    with pytest.raises(ParameterError, match="source predictions"):
        onehot_from_predictions([0, 1], [1], 2)


def test_crossfit_predictions_on_separated_classes(three_class_pair, rng):
    src, tgt, target_labels = three_class_pair
    preds_src, preds_tgt = crossfit_predictions(src, tgt, rng)
    assert np.mean(preds_src == src.labels + 1) > 0.99
    assert np.mean(preds_tgt == target_labels + 1) > 0.99


def test_user_features(three_class_pair):
    src, tgt, _ = three_class_pair
    emb = user_features(src.points ** 2, tgt.points ** 2)
    ce = embed_means(emb, src, tgt)
    np.testing.assert_allclose(ce.phi[0], (src.points[src.labels == 0] ** 2).mean(axis=0))


# ============================================
# Exact kernels
# ============================================

def test_energy_kernel_gram_by_hand():
    src = SourceDataset(points=np.array([[0.0, 0.0], [1.0, 0.0]]), labels=np.array([0, 1]),
                        n_classes=2)
    problem = kernel_problem(KernelBackend("energy"), src, TargetDataset([[1.0, 0.0]]))
    np.testing.assert_allclose(problem.gram.dense, [[0.0, 0.0], [0.0, 2.0]])
    np.testing.assert_allclose(problem.linear, [0.0, 2.0])
    assert problem.target_norm2 == pytest.approx(2.0)


def test_wide_gaussian_kernel_gives_all_ones(three_class_pair):
    src, tgt, _ = three_class_pair
    problem = kernel_problem(KernelBackend("gaussian", sigma=1e6 * 20.0), src, tgt)
    np.testing.assert_allclose(problem.gram.dense, np.ones((3, 3)), atol=1e-6)


def test_exact_gaussian_close_to_rff():
    rng = np.random.default_rng(1)
    points = rng.normal(size=(100, 2))
    labels = np.repeat([0, 1], 50)
    points[labels == 1] += 1.5
    src = SourceDataset(points=points, labels=labels, n_classes=2)
    tgt = TargetDataset(rng.normal(size=(60, 2)))

    exact = kernel_problem(KernelBackend("gaussian", sigma=1.0), src, tgt)
    emb = rff_sample(d=2, D=8192, sigma=1.0, rng=RngStream(seed=2))
    approx = embed_means(emb, src, tgt).problem()
    np.testing.assert_allclose(approx.gram.dense, exact.gram.dense, atol=0.02)
    np.testing.assert_allclose(approx.linear, exact.linear, atol=0.02)


def test_kernel_mean_blocking_is_consistent():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(37, 3))
    kb = KernelBackend("energy")
    direct = float(np.mean(kb.evaluate(a, a)))
    assert kernel_mean(kb, a, block_rows=5) == pytest.approx(direct, rel=1e-12)
    assert kernel_mean(kb, a, a, block_rows=8) == pytest.approx(direct, rel=1e-12)


def test_gaussian_kernel_needs_sigma():
    with pytest.raises(ParameterError):
        KernelBackend("gaussian")


# ============================================
# Concentration of empirical embeddings
# ============================================

def test_empirical_embedding_concentrates():
    """Deviation of a mean of bounded embeddings stays within the Hoeffding radius."""
    rng = np.random.default_rng(12)
    atoms = rng.normal(size=(6, 10))
    atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
    weights = rng.dirichlet(np.ones(6))
    population = weights @ atoms

    n, trials, delta = 400, 500, 0.1
    radius = (2.0 + np.sqrt(2.0 * np.log(2.0 / delta))) / np.sqrt(n)
    covered = 0
    for _ in range(trials):
        counts = rng.multinomial(n, weights)
        covered += np.linalg.norm(counts @ atoms / n - population) <= radius
    floor = (1 - delta) * trials - 3 * np.sqrt(trials * delta * (1 - delta))
    assert covered >= floor
