"""Separation-based quality proxies for comparing candidate label trees."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError
from .tree import LabelTree

__all__ = [
    "CategoryDistances",
    "QualityScore",
    "three_category_scores",
    "path_product_score",
    "read_distances",
    "write_distances",
]

LINKAGES = ("single", "average")


@dataclass(frozen=True)
class CategoryDistances:
    dist: np.ndarray

    def __post_init__(self):
        D = np.array(self.dist, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ParameterError(f"distance matrix must be square, got shape {D.shape}")
        if not np.all(np.isfinite(D)):
            raise ParameterError("distance matrix has non-finite entries")
        if not np.array_equal(D, D.T):
            raise ParameterError("distance matrix must be symmetric")
        if np.any(np.diag(D) != 0):
            raise ParameterError("distance matrix diagonal must be zero")
        off = D[~np.eye(len(D), dtype=bool)]
        if np.any(off <= 0):
            raise ParameterError("off-diagonal distances must be positive")
        D.setflags(write=False)
        object.__setattr__(self, "dist", D)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @classmethod
    def three(cls, d_ab: float, d_ac: float, d_bc: float) -> "CategoryDistances":
        return cls(np.array([[0.0, d_ab, d_ac], [d_ab, 0.0, d_bc], [d_ac, d_bc, 0.0]]))


@dataclass(frozen=True)
class QualityScore:
    per_category: tuple[float, ...]
    total: float
    proportionality: float = 1.0


def three_category_scores(d_ab: float, d_ac: float, d_bc: float, k: float = 1.0) -> dict[str, float]:
    """Totals for the three distinct three-category shapes.

    ``T1`` groups A with B, ``T2`` groups A with C, ``T4`` is flat. ``d_bc``
    does not enter the closed forms but must be a valid distance.
    """
    for name, v in (("d_ab", d_ab), ("d_ac", d_ac), ("d_bc", d_bc), ("k", k)):
        if not v > 0:
            raise ParameterError(f"{name} must be positive, got {v}")
    return {
        "T1": k * (2 * d_ac * d_ab + d_ac),
        "T2": k * (2 * d_ac * d_ab + d_ab),
        "T4": k * (2 * d_ab + d_ac),
    }


def _linkage(D: np.ndarray, a: list[int], b: list[int], how: str) -> float:
    block = D[np.ix_(a, b)]
    return float(block.min() if how == "single" else block.mean())


def path_product_score(
    tree: LabelTree,
    dist: CategoryDistances,
    k: float = 1.0,
    linkage: str = "single",
) -> QualityScore:
    """Per category, multiply the separations met on its root-to-leaf path.

    At each node with two or more children, the separation is the linkage
    distance between the child holding the category and its closest sibling.
    Single-child nodes contribute a factor of one.
    """
    if linkage not in LINKAGES:
        raise ParameterError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    if dist.n != tree.n_categories:
        raise ParameterError(f"tree has {tree.n_categories} categories, distances cover {dist.n}")
    if not k > 0:
        raise ParameterError(f"k must be positive, got {k}")
    D = dist.dist
    # separation of each child from its closest sibling, computed once per node
    sep: dict[int, float] = {}
    for node in tree.internal_nodes():
        if len(node.children) < 2:
            continue
        members = {c: sorted(tree[c].label_set) for c in node.children}
        for c in node.children:
            sep[c] = min(_linkage(D, members[c], members[o], linkage) for o in node.children if o != c)
    per = []
    for cat in range(tree.n_categories):
        p = 1.0
        for node_id in tree.path_to(cat)[1:]:
            p *= sep.get(node_id, 1.0)
        per.append(k * p)
    return QualityScore(tuple(per), float(sum(per)), float(k))


def write_distances(destination, dist: CategoryDistances) -> None:
    with open(destination, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in dist.dist:
            w.writerow([repr(float(v)) for v in row])


def read_distances(source) -> CategoryDistances:
    """Square numeric CSV, no header; lines starting with ``#`` are skipped."""
    path = Path(source)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FormatError("unparsable distance", line=lineno, source=path) from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError("ragged distance row", line=lineno, source=path)
    if not rows:
        raise FormatError("empty distance file", source=path)
    try:
        return CategoryDistances(np.asarray(rows))
    except ParameterError as exc:
        raise FormatError(str(exc), source=path) from None
