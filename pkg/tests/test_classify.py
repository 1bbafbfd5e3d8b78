import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from ftucker import classify as cl
from ftucker import datagen as dg
from ftucker.ftd import FtdConfig, reconstruct_on
from ftucker.kernel import KernelSpec
from ftucker.tucker import hosvd


def random_basis(rng, shape, k):
    q, _ = np.linalg.qr(rng.standard_normal((int(np.prod(shape)), k)))
    return cl.ClassBasis(label=0, elements=np.stack([c.reshape(shape) for c in q.T]))


def projection_residual(y, basis, k):
    """||y - sum alpha D||^2 with alpha from an explicit least-squares fit."""
    d = np.stack([e.ravel() for e in basis.elements[:k]], axis=1)
    alpha, *_ = np.linalg.lstsq(d, y.ravel(), rcond=None)
    return float(np.sum((y.ravel() - d @ alpha) ** 2))


@pytest.fixture(scope="module")
def small_data():
    return dg.synth_digit_dataset(dg.SynthConfig(num_classes=4, samples_per_class=12, p=13, seed=3))


def test_dataset_validation():
    with pytest.raises(ValueError):
        cl.LabeledDataset(samples=[np.ones((2, 3))], labels=[0, 1], grid=[0, 1, 2])
    with pytest.raises(ValueError):
        cl.LabeledDataset(samples=[np.ones((2, 3))], labels=[0], grid=[0, 1])
    with pytest.raises(ValueError):
        cl.LabeledDataset(samples=[np.ones((2, 3)), np.ones((3, 3))], labels=[0, 0], grid=[0, 1, 2])


def test_repeated_sample_basis(rng):
    y = rng.standard_normal((4, 3, 5))
    b = cl.basis_from_stack(np.stack([y, y, y]), (4, 3, 5))
    d1 = b.elements[0]
    yn = y / np.linalg.norm(y)
    assert min(np.linalg.norm(d1 - yn), np.linalg.norm(d1 + yn)) <= 1e-10


@given(st.integers(0, 10**6))
def test_basis_orthonormal(seed):
    rng = np.random.default_rng(seed)
    stack = rng.standard_normal((7, 4, 5, 3))
    b = cl.basis_from_stack(stack, (3, 4, 2))
    m = b.matrix()
    np.testing.assert_allclose(m @ m.T, np.eye(b.k_max), atol=1e-8)


def test_basis_spans_hosvd_subspace(rng):
    stack = rng.standard_normal((6, 5, 4, 3))
    ranks = (3, 2, 2)
    b = cl.basis_from_stack(stack, ranks)
    # oracle: rows of the sample-mode unfolding projected onto the truncated factors
    f = hosvd(stack, (6,) + ranks)
    proj = np.ones((1, 1))
    for u in f.factors[1:]:
        proj = np.kron(u @ u.T, proj)
    rows = stack.reshape(6, -1, order="F") @ proj
    expected = np.stack([e.reshape(-1, order="F") for e in b.elements], axis=1)
    angles = scipy.linalg.subspace_angles(rows.T, expected)
    assert np.max(angles) <= 1e-6


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_residual_identity(seed, k):
    rng = np.random.default_rng(seed)
    basis = random_basis(rng, (3, 4, 2), 5)
    y = rng.standard_normal((3, 4, 2))
    y /= np.linalg.norm(y)
    assert cl.residual(y, basis, k) == pytest.approx(projection_residual(y, basis, k), abs=1e-10)


def test_residual_edge_cases(rng):
    basis = random_basis(rng, (3, 4), 3)
    assert abs(cl.residual(basis.elements[0], basis, 3)) <= 1e-12
    m = basis.matrix()
    v = rng.standard_normal(12)
    v -= m.T @ (m @ v)
    v /= np.linalg.norm(v)
    assert cl.residual(v.reshape(3, 4), basis) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        cl.residual(2 * basis.elements[0], basis)
    with pytest.raises(ValueError):
        cl.residual(np.ones((4, 3)) / np.sqrt(12), basis)
    with pytest.raises(ValueError):
        basis.matrix(4)


def test_predict_examples(rng):
    bases = []
    for c in range(5):
        b = random_basis(rng, (3, 4), 2)
        bases.append(cl.ClassBasis(label=c, elements=b.elements))
    assert cl.predict(bases[3].elements[0], bases, 2) == 3
    same = [cl.ClassBasis(label=c, elements=bases[0].elements) for c in (4, 2, 7)]
    assert cl.predict(rng.standard_normal((3, 4)), same, 1) == 2
    with pytest.raises(ValueError):
        cl.predict(rng.standard_normal((3, 4)), [], 1)


def test_predictions_match_bruteforce(small_data):
    train, test = dg.split_train_test(small_data, 0.75, seed=0)
    bases = cl.train_hosvd(train, (5, 5, 2))
    for k in (1, 3, 6):
        pred = cl.predict_many(test.samples, bases, k)
        for y, p in zip(test.samples, pred):
            yn = y / np.linalg.norm(y)
            res = [cl.residual(yn, b, min(k, b.k_max)) for b in bases]
            assert p == bases[int(np.argmin(res))].label


def test_self_consistency_on_separable_classes(small_data):
    bases = cl.train_hosvd(small_data, (5, 5, 2))
    pred = cl.predict_many(small_data.samples, bases, 3)
    assert np.array_equal(pred, small_data.labels)


def test_k_validation(small_data):
    with pytest.raises(ValueError):
        cl.train_hosvd(small_data, (5, 5, 2), k=12)
    with pytest.raises(ValueError):
        cl.train_hosvd(small_data, (5, 5, 2), k=0)


def test_train_ftd_shapes(small_data):
    one = small_data.select([i for i, c in enumerate(small_data.labels) if c == 0])
    cfg = FtdConfig(ranks=(3, 3, 2), lam=1.0, max_iters=20, tol=1e-10,
                    kernel=KernelSpec("gaussian", 4.0))
    models = cl.train_ftd(one, cfg)
    assert list(models) == [0]
    m = models[0]
    assert m.core.shape == (12, 3, 3, 2)
    assert np.all(np.diff(m.objective_trace) <= 1e-9)
    assert cl.train_ftd(one, cfg, sample_rank=4)[0].core.shape[0] == 4
    with pytest.raises(ValueError):
        cl.train_ftd(one, FtdConfig(ranks=(3, 2)))


def test_planted_class_models_fit_well():
    spec = KernelSpec("gaussian", 4.0)
    samples, labels = [], []
    for c in range(2):
        t, _ = dg.planted_ftd_instance((6, 5, 5, 13), (3, 2, 2, 2), spec, seed=c,
                                       grid=np.linspace(1, 10, 13))
        samples += list(t)
        labels += [c] * 6
    data = cl.LabeledDataset(samples=samples, labels=labels, grid=np.linspace(1, 10, 13))
    models = cl.train_ftd(data, FtdConfig(ranks=(2, 2, 2), lam=1e-8, kernel=spec), sample_rank=3)
    for m in models.values():
        assert m.core.shape[0] == 3
    # class tensors are normalized per sample before fitting, which keeps them low rank
    for c, m in models.items():
        assert m.trace[-1] <= 1e-3


def test_transfer_on_training_grid(small_data):
    cfg = FtdConfig(ranks=(5, 5, 2), lam=1.0, max_iters=10, kernel=KernelSpec("gaussian", 4.0))
    models = cl.train_ftd(small_data, cfg)
    bases = cl.transfer_bases(models, small_data.grid, (5, 5, 2))
    for b in bases:
        rec = reconstruct_on(models[b.label], small_data.grid)
        stack = np.stack([r / np.linalg.norm(r) for r in rec])
        f = hosvd(stack, (stack.shape[0], 5, 5, 2))
        proj = np.ones((1, 1))
        for u in f.factors[1:]:
            proj = np.kron(u @ u.T, proj)
        rows = stack.reshape(stack.shape[0], -1, order="F") @ proj
        got = np.stack([e.reshape(-1, order="F") for e in b.elements], axis=1)
        assert np.max(scipy.linalg.subspace_angles(rows.T, got)) <= 1e-6
    k1 = cl.transfer_bases(models, small_data.grid, (5, 5, 2))[0]
    assert np.linalg.norm(k1.elements[0]) == pytest.approx(1.0)


def test_stratified_folds():
    labels = [0] * 7 + [1] * 5
    folds = cl.stratified_folds(labels, 5, seed=2)
    for c in (0, 1):
        counts = np.bincount(folds[np.array(labels) == c], minlength=5)
        assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(folds, cl.stratified_folds(labels, 5, seed=2))
    with pytest.raises(ValueError):
        cl.stratified_folds(labels, 1)
    with pytest.raises(ValueError):
        cl.stratified_folds([0, 0, 1], 2)


def test_cross_validate_separable(small_data):
    scores = cl.cross_validate(small_data, [(5, 5, 2), (3, 3, 1)], [1, 3], folds=4, seed=0)
    assert scores.shape == (2, 2)
    np.testing.assert_array_equal(scores, 1.0)


def test_cross_validate_shuffled_labels():
    data = dg.synth_digit_dataset(dg.SynthConfig(num_classes=4, samples_per_class=30, p=5, seed=1))
    labels = np.random.default_rng(0).permutation(data.labels)
    shuffled = cl.LabeledDataset(samples=data.samples, labels=labels, grid=data.grid)
    scores = cl.cross_validate(shuffled, [(4, 4, 2)], [2], folds=5, seed=0)
    # 120 validation predictions in total; 4 binomial standard deviations around 1/4
    sd = np.sqrt(0.25 * 0.75 / 120)
    assert abs(scores[0, 0] - 0.25) <= 4 * sd


def test_cross_validate_degenerate():
    # one sample per class and fold leaves a single training sample, so no k is valid
    data = dg.synth_digit_dataset(dg.SynthConfig(num_classes=2, samples_per_class=2, p=4))
    with pytest.raises(ValueError):
        cl.cross_validate(data, [(2, 2, 1)], [1], folds=2)


def test_parallel_matches_serial(small_data, monkeypatch):
    serial = cl.train_hosvd(small_data, (5, 5, 2))
    monkeypatch.setenv("FTUCKER_THREADS", "3")
    parallel = cl.train_hosvd(small_data, (5, 5, 2))
    for a, b in zip(serial, parallel):
        assert a.label == b.label
        np.testing.assert_array_equal(a.elements, b.elements)
