import numpy as np
import pytest

from vclt.classifier import macro_accuracy
from vclt.community import louvain_hierarchy
from vclt.confusion_graph import build_confusion_graph
from vclt.errors import FormatError, ParameterError
from vclt.synthetic import (
    CIFAR10_NAMES,
    BlobSpec,
    generate_blobs,
    generate_score_log,
    nearest_centroid_predict,
    read_features,
    supercluster_pairs,
    write_features,
)


def test_deterministic():
    a, b = generate_blobs(BlobSpec(seed=9)), generate_blobs(BlobSpec(seed=9))
    for f in ("X_train", "y_train", "X_test", "y_test", "class_centers"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = generate_blobs(BlobSpec(seed=10))
    assert not np.array_equal(a.X_train, c.X_train)


def test_split_sizes():
    d = generate_blobs(BlobSpec())
    assert d.X_train.shape == (1600, 8) and d.X_test.shape == (400, 8)
    assert np.bincount(d.y_train).tolist() == [100] * 16


def test_tiny_spread_is_trivially_separable():
    d = generate_blobs(BlobSpec(intra_spread=1e-6, seed=2))
    pred = nearest_centroid_predict(d.X_train, d.y_train, d.X_test)
    assert macro_accuracy(d.y_test, pred, 16) == 100.0


def test_supercluster_geometry_seed7():
    d = generate_blobs(BlobSpec(seed=7))
    means = np.stack([d.X_train[d.y_train == c].mean(axis=0) for c in range(16)])
    D = np.linalg.norm(means[:, None] - means[None], axis=2)
    same = d.supercluster_of[:, None] == d.supercluster_of[None]
    off = ~np.eye(16, dtype=bool)
    assert D[same & off].mean() < D[~same].mean()
    assert D[same & off].max() < D[~same].min()


def test_invalid_specs():
    with pytest.raises(ParameterError):
        BlobSpec(n_classes=3, n_superclusters=4)
    with pytest.raises(ParameterError):
        BlobSpec(intra_spread=0)


def test_score_log_basics():
    labels = np.repeat(np.arange(4), 10)
    clean = generate_score_log(None, labels, 0.0, n_classes=4)
    assert build_confusion_graph(clean, 4, 1).edges == {}
    noisy = generate_score_log(None, labels, 0.1, [(0, 1, 0.3)], 4, seed=3)
    assert np.allclose(noisy.scores.sum(axis=1), 1.0, atol=1e-9)
    with pytest.raises(ParameterError):
        generate_score_log(None, labels, 0.1, [(0, 1, 1.0)], 4)
    with pytest.raises(ParameterError):
        generate_score_log(None, labels, 0.1, [(0, 0, 0.5)], 4)


def test_per_sample_generators():
    labels = np.repeat(np.arange(3), 5)
    full = generate_score_log(None, labels, 0.2, [(0, 1, 0.3)], 3, seed=4)
    part = generate_score_log(None, labels[:7], 0.2, [(0, 1, 0.3)], 3, seed=4)
    assert np.array_equal(full.scores[:7], part.scores)


def test_dog_cat_pair_is_max_edge():
    dog, cat = CIFAR10_NAMES.index("dog"), CIFAR10_NAMES.index("cat")
    labels = np.repeat(np.arange(10), 30)
    log = generate_score_log(None, labels, 0.05, [(cat, dog, 0.4)], 10, seed=1)
    g = build_confusion_graph(log, 10, 3)
    assert g.strongest_edge() == (min(cat, dog), max(cat, dog))


def test_planted_superclusters_recovered():
    hits = 0
    for seed in range(100):
        d = generate_blobs(BlobSpec(seed=seed))
        log = generate_score_log(d.X_train, d.y_train, 0.05, supercluster_pairs(d.supercluster_of, 0.2), 16, seed)
        h = louvain_hierarchy(build_confusion_graph(log, 16, 3))
        planted = sorted(tuple(np.flatnonzero(d.supercluster_of == s)) for s in range(4))
        hits += sorted(h[0].communities) == planted
    assert hits >= 95


def test_feature_file_round_trip(tmp_path):
    d = generate_blobs(BlobSpec(n_classes=4, n_superclusters=2, samples_per_class=5))
    write_features(tmp_path / "f.csv", d.X_train, d.y_train)
    ids, X, y = read_features(tmp_path / "f.csv")
    assert np.array_equal(X, d.X_train) and np.array_equal(y, d.y_train)
    assert ids[0] == "0"
    (tmp_path / "bad.csv").write_text("sample_id,label,x_0\na,0,1.0\nb,1\n")
    with pytest.raises(FormatError) as info:
        read_features(tmp_path / "bad.csv")
    assert info.value.line == 3
