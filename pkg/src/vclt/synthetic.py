"""Gaussian blobs with planted hierarchy, and score logs with planted confusion."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .confusion_graph import ScoreLog
from .errors import FormatError, ParameterError

__all__ = [
    "BlobSpec",
    "BlobData",
    "generate_blobs",
    "generate_score_log",
    "supercluster_pairs",
    "CIFAR10_NAMES",
    "CIFAR10_PAIRS",
    "CIFAR10_GROUPS",
    "cifar10_confusion_pairs",
    "cifar10_score_log",
    "nearest_centroid_predict",
    "write_features",
    "read_features",
]

CIFAR10_NAMES = (
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck",
)
# strongly confused pairs, and the two coarse groups they fall into
CIFAR10_PAIRS = ((0, 8), (1, 9), (3, 5), (4, 7), (2, 6))
CIFAR10_GROUPS = ((0, 1, 8, 9), (2, 3, 4, 5, 6, 7))


@dataclass(frozen=True)
class BlobSpec:
    n_classes: int = 16
    n_superclusters: int = 4
    samples_per_class: int = 125
    dim: int = 8
    intra_spread: float = 1.0
    inter_spread: float = 10.0
    seed: int = 0
    class_spread: float = 3.0
    train_fraction: float = 0.8

    def __post_init__(self):
        if not 1 <= self.n_superclusters <= self.n_classes:
            raise ParameterError("need 1 <= n_superclusters <= n_classes")
        if self.samples_per_class < 2 or self.dim < 1:
            raise ParameterError("need samples_per_class >= 2 and dim >= 1")
        if not (self.intra_spread > 0 and self.inter_spread > 0 and self.class_spread > 0):
            raise ParameterError("spreads must be positive")
        if not 0 < self.train_fraction < 1:
            raise ParameterError("train_fraction must lie in (0, 1)")


@dataclass
class BlobData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    class_centers: np.ndarray
    supercluster_centers: np.ndarray
    supercluster_of: np.ndarray


def generate_blobs(spec: BlobSpec) -> BlobData:
    """Class centres scattered around supercluster centres, isotropic samples around each class.

    Superclusters own contiguous blocks of class indices. Each class's samples
    come from their own generator keyed by ``(seed, class)``, and the first
    ``train_fraction`` of them form the training split.
    """
    rng = np.random.default_rng([spec.seed, 0])
    super_centers = rng.normal(scale=spec.inter_spread, size=(spec.n_superclusters, spec.dim))
    blocks = np.array_split(np.arange(spec.n_classes), spec.n_superclusters)
    supercluster_of = np.empty(spec.n_classes, dtype=np.int64)
    for s, block in enumerate(blocks):
        supercluster_of[block] = s
    offsets = rng.normal(scale=spec.class_spread, size=(spec.n_classes, spec.dim))
    centers = super_centers[supercluster_of] + offsets

    n_train = int(round(spec.samples_per_class * spec.train_fraction))
    Xtr, ytr, Xte, yte = [], [], [], []
    for c in range(spec.n_classes):
        crng = np.random.default_rng([spec.seed, 1, c])
        pts = centers[c] + crng.normal(scale=spec.intra_spread, size=(spec.samples_per_class, spec.dim))
        Xtr.append(pts[:n_train])
        Xte.append(pts[n_train:])
        ytr.append(np.full(n_train, c))
        yte.append(np.full(spec.samples_per_class - n_train, c))
    return BlobData(
        np.vstack(Xtr), np.concatenate(ytr), np.vstack(Xte), np.concatenate(yte),
        centers, super_centers, supercluster_of,
    )


def supercluster_pairs(supercluster_of: Sequence[int], strength: float) -> list[tuple[int, int, float]]:
    """Every within-supercluster class pair at the given strength."""
    sc = np.asarray(supercluster_of)
    return [
        (a, b, strength)
        for a in range(len(sc))
        for b in range(a + 1, len(sc))
        if sc[a] == sc[b]
    ]


def generate_score_log(
    features,
    labels,
    noise: float,
    confusion_pairs: Sequence[tuple[int, int, float]] = (),
    n_classes: int | None = None,
    seed: int = 0,
) -> ScoreLog:
    """Probability-like scores peaked at the true label.

    For sample ``i`` with label ``t``, every planted partner ``p`` of ``t``
    receives ``strength * u`` with ``u ~ U(0.5, 1.5)``, every category
    receives ``noise * |N(0, 1)|``, and the row is normalized to sum 1. Each
    sample draws from its own generator keyed by ``(seed, i)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if features is not None and len(features) != n:
        raise ParameterError("features and labels differ in length")
    N = int(n_classes if n_classes is not None else (labels.max() + 1 if n else 0))
    if noise < 0:
        raise ParameterError(f"noise must be >= 0, got {noise}")
    partners: list[list[tuple[int, float]]] = [[] for _ in range(N)]
    for a, b, strength in confusion_pairs:
        if not 0 < strength < 1:
            raise ParameterError(f"confusion strength must lie in (0, 1), got {strength}")
        if not (0 <= a < N and 0 <= b < N) or a == b:
            raise ParameterError(f"bad confusion pair ({a}, {b})")
        partners[a].append((b, strength))
        partners[b].append((a, strength))

    scores = np.zeros((n, N))
    for i, t in enumerate(labels):
        rng = np.random.default_rng([seed, i])
        row = scores[i]
        row[t] = 1.0
        for p, strength in partners[t]:
            row[p] += strength * rng.uniform(0.5, 1.5)
        if noise > 0:
            row += noise * np.abs(rng.standard_normal(N))
        row /= row.sum()
    return ScoreLog([str(i) for i in range(n)], labels, scores)


def cifar10_confusion_pairs(pair_strength: float = 0.5, group_strength: float = 0.25) -> list[tuple[int, int, float]]:
    pairs = [(a, b, pair_strength) for a, b in CIFAR10_PAIRS]
    pair_set = {frozenset(p) for p in CIFAR10_PAIRS}
    for group in CIFAR10_GROUPS:
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                if frozenset((a, b)) not in pair_set:
                    pairs.append((a, b, group_strength))
    return pairs


def cifar10_score_log(samples_per_class: int = 100, noise: float = 0.01, seed: int = 0) -> ScoreLog:
    """CIFAR-10-style log: five strongly confused pairs inside two weakly confused groups."""
    labels = np.repeat(np.arange(10), samples_per_class)
    return generate_score_log(None, labels, noise, cifar10_confusion_pairs(), n_classes=10, seed=seed)


def nearest_centroid_predict(X_train, y_train, X_test) -> np.ndarray:
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train)
    classes = np.unique(y_train)
    centroids = np.stack([X_train[y_train == c].mean(axis=0) for c in classes])
    d = ((np.asarray(X_test, dtype=float)[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    return classes[np.argmin(d, axis=1)]


def write_features(destination, X, y, sample_ids: Sequence[str] | None = None) -> None:
    """Feature CSV: ``sample_id,label,x_0,...,x_{d-1}``."""
    X = np.asarray(X, dtype=float)
    ids = sample_ids if sample_ids is not None else [str(i) for i in range(len(X))]
    with open(destination, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "label"] + [f"x_{j}" for j in range(X.shape[1])])
        for sid, lab, row in zip(ids, y, X):
            w.writerow([sid, int(lab)] + [repr(float(v)) for v in row])


def read_features(source) -> tuple[list[str], np.ndarray, np.ndarray]:
    path = Path(source)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty feature file", line=1, source=path) from None
        d = len(header) - 2
        if d < 1 or header != ["sample_id", "label"] + [f"x_{j}" for j in range(d)]:
            raise FormatError("header must be sample_id,label,x_0,...", line=1, source=path)
        ids, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise FormatError(f"expected {d + 2} fields, got {len(row)}", line=lineno, source=path)
            try:
                labels.append(int(row[1]))
                rows.append([float(v) for v in row[2:]])
            except ValueError:
                raise FormatError("unparsable number", line=lineno, source=path) from None
            ids.append(row[0])
    return ids, np.asarray(rows, dtype=float).reshape(-1, d), np.asarray(labels, dtype=np.int64)
