"""Modularity-maximizing hierarchical community detection (Louvain).

The implementation is deterministic: vertices are swept in ascending order,
ties between candidate communities go to the lowest community id, and a
vertex only leaves its community for a strictly better one.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .confusion_graph import ConfusionGraph
from .errors import FormatError, InvariantError, NumericError, ParameterError

__all__ = [
    "Partition",
    "PartitionHierarchy",
    "modularity",
    "louvain_hierarchy",
    "brute_force_best_partition",
    "write_hierarchy",
    "read_hierarchy",
]

EPSILON = 1e-9
MAX_SWEEPS = 10_000
BRUTE_FORCE_LIMIT = 10


@dataclass(frozen=True)
class Partition:
    community_of: tuple[int, ...]
    communities: tuple[tuple[int, ...], ...]
    modularity: float

    @classmethod
    def from_labels(cls, labels: Sequence[int], modularity: float) -> "Partition":
        labels = canonical_labels(labels)
        groups: list[list[int]] = [[] for _ in range(max(labels) + 1)] if len(labels) else []
        for v, c in enumerate(labels):
            groups[c].append(v)
        return cls(tuple(labels), tuple(tuple(g) for g in groups), float(modularity))

    def __len__(self):
        return len(self.communities)


@dataclass(frozen=True)
class PartitionHierarchy:
    """Fine-to-coarse partitions; ``levels[0]`` comes from the first pass."""

    levels: tuple[Partition, ...]

    def __len__(self):
        return len(self.levels)

    def __iter__(self) -> Iterator[Partition]:
        return iter(self.levels)

    def __getitem__(self, i) -> Partition:
        return self.levels[i]

    @property
    def label_sets(self) -> list[list[frozenset[int]]]:
        return [[frozenset(c) for c in level.communities] for level in self.levels]


def canonical_labels(labels: Sequence[int]) -> list[int]:
    """Renumber communities in order of their smallest member."""
    mapping: dict[int, int] = {}
    out = []
    for c in labels:
        c = int(c)
        if c not in mapping:
            mapping[c] = len(mapping)
        out.append(mapping[c])
    return out


def _modularity_matrix(A: np.ndarray, labels: np.ndarray) -> float:
    two_m = A.sum()
    if two_m <= 0:
        raise NumericError("modularity is undefined for a graph with zero total edge weight")
    n_comm = int(labels.max()) + 1
    P = np.zeros((len(labels), n_comm))
    P[np.arange(len(labels)), labels] = 1.0
    inner = np.einsum("ic,ij,jc->c", P, A, P)
    tot = P.T @ A.sum(axis=1)
    return float(np.sum(inner / two_m - (tot / two_m) ** 2))


def modularity(graph: ConfusionGraph, partition: Partition | Sequence[int]) -> float:
    labels = partition.community_of if isinstance(partition, Partition) else partition
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (graph.n_categories,):
        raise ParameterError(
            f"partition covers {labels.size} vertices, graph has {graph.n_categories}"
        )
    if labels.size and labels.min() < 0:
        raise ParameterError("community ids must be non-negative")
    return _modularity_matrix(graph.adjacency(), np.asarray(canonical_labels(labels)))


def _local_moves(A: np.ndarray) -> np.ndarray:
    """One Louvain pass of vertex moves on a (possibly self-looped) graph."""
    n = A.shape[0]
    k = A.sum(axis=1)
    two_m = k.sum()
    comm = np.arange(n)
    tot = k.copy()
    neighbours = [[j for j in np.flatnonzero(A[i]) if j != i] for i in range(n)]
    for _ in range(MAX_SWEEPS):
        improvement = 0.0
        for i in range(n):
            ci = comm[i]
            links: dict[int, float] = {}
            for j in neighbours[i]:
                links[comm[j]] = links.get(comm[j], 0.0) + A[i, j]
            tot[ci] -= k[i]
            stay = 2.0 * (links.get(ci, 0.0) - tot[ci] * k[i] / two_m) / two_m
            best, best_gain = ci, stay
            for c in sorted(links):
                if c == ci:
                    continue
                gain = 2.0 * (links[c] - tot[c] * k[i] / two_m) / two_m
                if gain > best_gain:
                    best, best_gain = c, gain
            tot[best] += k[i]
            if best != ci:
                comm[i] = best
                improvement += best_gain - stay
        if improvement < EPSILON:
            break
    else:
        raise NumericError("Louvain local moves did not converge")
    return np.asarray(canonical_labels(comm))


def _aggregate(A: np.ndarray, labels: np.ndarray) -> np.ndarray:
    P = np.zeros((A.shape[0], int(labels.max()) + 1))
    P[np.arange(A.shape[0]), labels] = 1.0
    return P.T @ A @ P


def louvain_hierarchy(graph: ConfusionGraph) -> PartitionHierarchy:
    if graph.n_categories == 0:
        raise ParameterError("cannot detect communities in an empty graph")
    if not any(w > 0 for w in graph.edges.values()):
        raise ParameterError("graph has no positive-weight edge")
    A0 = graph.adjacency()
    A = A0
    vertex_comm = np.arange(graph.n_categories)
    levels: list[Partition] = []
    while True:
        labels = _local_moves(A)
        n_comm = int(labels.max()) + 1
        if n_comm == A.shape[0]:
            break
        vertex_comm = labels[vertex_comm]
        q = _modularity_matrix(A0, vertex_comm)
        if levels and q - levels[-1].modularity < EPSILON:
            break
        levels.append(Partition.from_labels(vertex_comm, q))
        if n_comm == 1:
            break
        A = _aggregate(A, labels)
    if not levels:
        raise InvariantError("first Louvain pass merged nothing")
    return PartitionHierarchy(tuple(levels))


def _set_partitions(n: int) -> Iterator[list[int]]:
    """Restricted growth strings of length ``n`` in lexicographic order."""
    rgs = [0] * n

    def rec(i: int, m: int):
        if i == n:
            yield list(rgs)
            return
        for c in range(m + 2):
            rgs[i] = c
            yield from rec(i + 1, max(m, c))

    if n == 0:
        return
    yield from rec(1, 0)


def brute_force_best_partition(graph: ConfusionGraph) -> Partition:
    """Exhaustive modularity optimum; ties go to fewer communities, then lexicographic order."""
    n = graph.n_categories
    if n > BRUTE_FORCE_LIMIT:
        raise ParameterError(f"brute force limited to {BRUTE_FORCE_LIMIT} vertices, got {n}")
    A = graph.adjacency()
    two_m = A.sum()
    if two_m <= 0:
        raise ParameterError("graph needs at least one positive-weight edge")
    k = A.sum(axis=1)
    B = (A - np.outer(k, k) / two_m) / two_m
    best_q, best_key, best = -np.inf, None, None
    for rgs in _set_partitions(n):
        lab = np.asarray(rgs)
        q = float(B[lab[:, None] == lab[None, :]].sum())
        key = (max(rgs) + 1, rgs)
        if q > best_q + 1e-12 or (abs(q - best_q) <= 1e-12 and key < best_key):
            best_q, best_key, best = max(q, best_q), key, rgs
    return Partition.from_labels(best, _modularity_matrix(A, np.asarray(best)))


def write_hierarchy(hierarchy: PartitionHierarchy, destination) -> None:
    lines = []
    for i, level in enumerate(hierarchy.levels, start=1):
        lines.append(f"level {i} Q={level.modularity!r}")
        for cid, members in enumerate(level.communities):
            lines.append(f"community {cid}: {' '.join(map(str, members))}")
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_hierarchy(source) -> PartitionHierarchy:
    path = Path(source)
    raw: list[tuple[float, list[list[int]], int]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            if line.startswith("level "):
                head, q = line.split(" Q=")
                idx = int(head.split()[1])
                if idx != len(raw) + 1:
                    raise FormatError(f"expected level {len(raw) + 1}, got {idx}", line=lineno, source=path)
                raw.append((float(q), [], lineno))
            elif line.startswith("community "):
                if not raw:
                    raise FormatError("community before any level", line=lineno, source=path)
                head, members = line.split(":", 1)
                cid = int(head.split()[1])
                if cid != len(raw[-1][1]):
                    raise FormatError(f"community ids must be sequential, got {cid}", line=lineno, source=path)
                ids = [int(t) for t in members.split()]
                if not ids:
                    raise FormatError("empty community", line=lineno, source=path)
                raw[-1][1].append(ids)
            else:
                raise FormatError(f"unrecognized line {line!r}", line=lineno, source=path)
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"unparsable line {line!r}", line=lineno, source=path) from None
    if not raw:
        raise FormatError("no levels found", source=path)
    levels = []
    for q, comms, lineno in raw:
        members = sorted(v for c in comms for v in c)
        n = len(members)
        if members != list(range(n)):
            raise FormatError("communities must partition 0..N-1", line=lineno, source=path)
        labels = [0] * n
        for cid, c in enumerate(comms):
            for v in c:
                labels[v] = cid
        part = Partition.from_labels(labels, q)
        if [list(c) for c in part.communities] != [sorted(c) for c in comms]:
            raise FormatError("communities must be listed in canonical order", line=lineno, source=path)
        levels.append(part)
    return PartitionHierarchy(tuple(levels))
