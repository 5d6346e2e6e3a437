import numpy as np
import pytest

from conftest import qp_dual_oracle
from vclt.community import Partition, PartitionHierarchy
from vclt.errors import DataCoverageError, ParameterError
from vclt.kernels import KernelCombination, KernelSpec, gram_matrix
from vclt.node_trainer import (
    NodeClassifier,
    SiblingGroupSamples,
    TrainingConfig,
    fit_sibling_group,
    score,
    train_sibling_group,
    train_tree,
)
from vclt.synthetic import BlobSpec, CIFAR10_GROUPS, CIFAR10_PAIRS, generate_blobs
from vclt.tree import build_vclt

LIN = KernelSpec("linear")


def two_blobs(rng, n=20):
    def disc(center):
        r = 0.5 * np.sqrt(rng.random(n))
        t = rng.uniform(0, 2 * np.pi, n)
        return np.c_[center[0] + r * np.cos(t), center[1] + r * np.sin(t)]

    X = np.vstack([disc((-2, 0)), disc((2, 0))])
    return X, np.repeat([0, 1], n)


def test_separable_two_children(rng):
    X, t = two_blobs(rng)
    clfs = train_sibling_group(SiblingGroupSamples(X, t, (5, 6)), cfg=TrainingConfig(), kernels=[LIN])
    F = np.stack([c.decision_function(X) for c in clfs], axis=1)
    assert np.all(np.argmax(F, axis=1) == t)
    assert np.all(F[np.arange(len(t)), t] > F[np.arange(len(t)), 1 - t])
    assert np.all(np.sign(F[np.arange(len(t)), t]) == 1)
    assert [c.node_id for c in clfs] == [5, 6]


def test_uniform_start_and_simplex(rng):
    X = rng.normal(size=(30, 3))
    t = rng.integers(3, size=30)
    t[:3] = [0, 1, 2]
    fit = fit_sibling_group(SiblingGroupSamples(X, t, (0, 1, 2)), cfg=TrainingConfig(mkl_iters=4),
                            kernels=["linear", "poly:2:1", "rbf:auto"])
    assert fit.weight_history[0].tolist() == pytest.approx([1 / 3] * 3)
    assert len(fit.weight_history) == 5
    for d in fit.weight_history:
        assert np.all(d >= 0) and abs(d.sum() - 1) <= 1e-9
    for a in fit.alphas:
        assert np.all(a >= 0) and np.all(a <= 1.0)
    for c in fit.classifiers:
        assert np.all(np.isfinite(c.dual_coefs)) and np.all(np.abs(c.dual_coefs) <= 1.0 + 1e-9)


def test_group_duals_match_reference_qp(rng):
    X = rng.normal(size=(18, 2))
    t = (X[:, 0] > 0).astype(int)
    fit = fit_sibling_group(SiblingGroupSamples(X, t, (0, 1)), cfg=TrainingConfig(rho=0.0))
    K = gram_matrix(fit.kernel, X)
    for j, dual in enumerate(fit.duals):
        ref, _ = qp_dual_oracle(K, np.where(t == j, 1.0, -1.0), 1.0)
        assert dual == pytest.approx(ref, abs=1e-4)


def test_dual_history_non_increasing(rng):
    for seed in range(5):
        r = np.random.default_rng(seed)
        X = r.normal(size=(40, 3))
        t = r.integers(2, size=40)
        fit = fit_sibling_group(SiblingGroupSamples(X, t, (0, 1)), cfg=TrainingConfig(mkl_iters=6))
        h = np.asarray(fit.dual_history)
        assert np.all(np.diff(h) <= 1e-6)


def test_score_examples():
    comb = KernelCombination((LIN,), (1.0,))
    empty = NodeClassifier(0, 2, np.array([], dtype=int), np.array([]), 0.7, comb, np.zeros((0, 2)))
    assert score(empty, None, np.array([3.0, -1.0])) == 0.7
    one = NodeClassifier(0, 2, np.array([0]), np.array([1.0]), 0.0, comb, np.array([[1.0, 0.0]]))
    assert score(one, np.array([[1.0, 0.0]]), np.array([2.0, 0.0])) == 2.0
    with pytest.raises(ParameterError):
        score(one, None, np.array([1.0, 2.0, 3.0]))


def test_errors(rng):
    X = rng.normal(size=(6, 2))
    with pytest.raises(DataCoverageError):
        train_sibling_group(SiblingGroupSamples(X, [0, 0, 0, 1, 1, 1], (0, 1, 2)))
    X[2, 1] = np.nan
    with pytest.raises(ParameterError):
        train_sibling_group(SiblingGroupSamples(X, [0, 0, 0, 1, 1, 1], (0, 1)))
    with pytest.raises(ParameterError):
        train_sibling_group(SiblingGroupSamples(X[:2], [0, 0], (0,)))
    with pytest.raises(ParameterError):
        TrainingConfig(C=0)


def test_flat_tree_is_one_group():
    data = generate_blobs(BlobSpec(n_classes=4, n_superclusters=2, samples_per_class=20, seed=1))
    tree = build_vclt(PartitionHierarchy((Partition.from_labels([0, 0, 0, 0], 0.0),)))
    model = train_tree(tree, data.X_train, data.y_train)
    trained = [k for k, v in model.diagnostics.items() if not v["passthrough"]]
    assert trained == [tree.root.node_id]
    assert sorted(model.classifiers) == [0, 1, 2, 3]
    # no parent scorer at the root, so no inter-level accounting
    assert model.diagnostics[tree.root.node_id]["violations_before"] is None


def cifar10_hierarchy():
    labels1 = [0] * 10
    for cid, (a, b) in enumerate(sorted(CIFAR10_PAIRS)):
        labels1[a] = labels1[b] = cid
    labels2 = [0 if c in CIFAR10_GROUPS[0] else 1 for c in range(10)]
    return PartitionHierarchy((Partition.from_labels(labels1, 0.0), Partition.from_labels(labels2, 0.0)))


def test_cifar10_tree_groups_and_constraint():
    data = generate_blobs(BlobSpec(n_classes=10, n_superclusters=2, samples_per_class=30, seed=4))
    tree = build_vclt(cifar10_hierarchy())
    model = train_tree(tree, data.X_train, data.y_train, n_jobs=3)
    groups = [k for k, v in model.diagnostics.items() if not v["passthrough"]]
    assert len(groups) == 8 and model.passthrough == []
    for node_id, diag in model.diagnostics.items():
        if diag["violations_before"] is not None:
            assert diag["violations_after"] <= diag["violations_before"]
    again = train_tree(tree, data.X_train, data.y_train, n_jobs=1)
    for k, c in model.classifiers.items():
        assert np.array_equal(c.dual_coefs, again.classifiers[k].dual_coefs)
        assert c.bias == again.classifiers[k].bias


def test_single_child_passthrough():
    data = generate_blobs(BlobSpec(n_classes=3, n_superclusters=1, samples_per_class=20, seed=2))
    h = PartitionHierarchy((Partition.from_labels([0, 0, 1], 0.0),))
    tree = build_vclt(h)
    model = train_tree(tree, data.X_train, data.y_train)
    lone = tree[2].parent
    assert lone in model.passthrough
    assert model.diagnostics[lone] == {"passthrough": True}
