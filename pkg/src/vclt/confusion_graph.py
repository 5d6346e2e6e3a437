"""Confusion graphs built from per-sample classifier scores.

Every test sample contributes the normalized scores of its top-``tau``
predicted categories to the edge joining its true label and each predicted
label. Correct-label mass is discarded, so the graph only carries
inter-category confusion.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import FormatError, ParameterError

__all__ = [
    "ScoreRecord",
    "ScoreLog",
    "ConfusionGraph",
    "build_confusion_graph",
    "top_tau_shares",
    "write_graph",
    "read_graph",
    "write_score_log",
    "read_score_log",
]

GRAPH_HEADER = "# vclt-graph v1"


@dataclass(frozen=True)
class ScoreRecord:
    sample_id: str
    true_label: int
    scores: tuple[float, ...]


@dataclass
class ScoreLog:
    """Column-oriented score log: one row of ``scores`` per sample."""

    sample_ids: list[str]
    labels: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2:
            raise FormatError(f"scores must be 2-D, got shape {self.scores.shape}")
        if len(self.sample_ids) != len(self.labels) or len(self.labels) != len(self.scores):
            raise FormatError("sample_ids, labels and scores disagree in length")

    def __len__(self):
        return len(self.labels)

    @property
    def n_categories(self) -> int:
        return self.scores.shape[1]

    @classmethod
    def from_records(cls, records: Sequence[ScoreRecord], n_categories: int) -> "ScoreLog":
        ids, labels, rows = [], [], []
        for i, rec in enumerate(records):
            if len(rec.scores) != n_categories:
                raise FormatError(
                    f"record {rec.sample_id!r} has {len(rec.scores)} scores, expected {n_categories}",
                    line=i + 1,
                )
            ids.append(str(rec.sample_id))
            labels.append(int(rec.true_label))
            rows.append(rec.scores)
        scores = np.asarray(rows, dtype=np.float64).reshape(len(rows), n_categories)
        return cls(ids, np.asarray(labels, dtype=np.int64), scores)

    def records(self) -> Iterable[ScoreRecord]:
        for sid, lab, row in zip(self.sample_ids, self.labels, self.scores):
            yield ScoreRecord(sid, int(lab), tuple(float(s) for s in row))


@dataclass(frozen=True)
class ConfusionGraph:
    """Undirected weighted graph over ``n_categories`` vertices.

    ``edges`` maps ``(u, v)`` with ``u < v`` to a positive weight.
    """

    n_categories: int
    category_names: tuple[str, ...]
    edges: Mapping[tuple[int, int], float] = field(default_factory=dict)
    tau: int | None = None

    def __post_init__(self):
        if len(self.category_names) != self.n_categories:
            raise ParameterError(
                f"{len(self.category_names)} category names for {self.n_categories} categories"
            )
        for (u, v), w in self.edges.items():
            if not (0 <= u < v < self.n_categories):
                raise ParameterError(f"bad edge key {(u, v)}")
            if not (math.isfinite(w) and w >= 0):
                raise ParameterError(f"edge {(u, v)} has invalid weight {w!r}")

    @property
    def total_weight(self) -> float:
        return float(sum(self.edges.values()))

    def weight(self, u: int, v: int) -> float:
        if u > v:
            u, v = v, u
        return self.edges.get((u, v), 0.0)

    def adjacency(self) -> np.ndarray:
        """Dense symmetric adjacency matrix with a zero diagonal."""
        A = np.zeros((self.n_categories, self.n_categories))
        for (u, v), w in self.edges.items():
            A[u, v] = A[v, u] = w
        return A

    def strongest_edge(self) -> tuple[int, int] | None:
        if not self.edges:
            return None
        # ties resolved by smallest key so the result is deterministic
        return max(sorted(self.edges), key=lambda e: self.edges[e])


def default_names(n: int) -> tuple[str, ...]:
    return tuple(str(i) for i in range(n))


def top_tau_shares(scores: np.ndarray, tau: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and normalized shares of the ``tau`` largest entries per row.

    Ties at the cut are broken toward the lower category index. A slice with
    negative entries is shifted by its minimum first; a slice that is all zero
    after shifting gets uniform ``1/tau`` shares.
    """
    scores = np.atleast_2d(scores)
    # stable sort on the negated scores keeps lower indices first among equals
    order = np.argsort(-scores, axis=1, kind="stable")[:, :tau]
    top = np.take_along_axis(scores, order, axis=1)
    lo = top.min(axis=1, keepdims=True)
    top = np.where(lo < 0, top - lo, top)
    total = top.sum(axis=1, keepdims=True)
    uniform = total <= 0
    shares = np.divide(top, total, out=np.zeros_like(top), where=~uniform)
    shares[uniform[:, 0]] = 1.0 / tau
    return order, shares


def build_confusion_graph(
    records: Sequence[ScoreRecord] | ScoreLog,
    n_categories: int,
    tau: int,
    category_names: Sequence[str] | None = None,
) -> ConfusionGraph:
    if not isinstance(tau, (int, np.integer)) or not 1 <= tau <= n_categories:
        raise ParameterError(f"tau must lie in [1, {n_categories}], got {tau!r}")
    log = records if isinstance(records, ScoreLog) else ScoreLog.from_records(records, n_categories)
    if log.n_categories != n_categories and len(log):
        raise FormatError(f"score rows have {log.n_categories} entries, expected {n_categories}")
    names = tuple(category_names) if category_names is not None else default_names(n_categories)
    if len(log) == 0:
        return ConfusionGraph(n_categories, names, {}, int(tau))

    if not np.all(np.isfinite(log.scores)):
        bad = int(np.argwhere(~np.isfinite(log.scores))[0, 0])
        raise FormatError(f"non-finite score in record {log.sample_ids[bad]!r}", line=bad + 1)
    if log.labels.min() < 0 or log.labels.max() >= n_categories:
        bad = int(np.flatnonzero((log.labels < 0) | (log.labels >= n_categories))[0])
        raise FormatError(f"true_label {log.labels[bad]} out of range", line=bad + 1)

    order, shares = top_tau_shares(log.scores, tau)
    true = np.repeat(log.labels[:, None], tau, axis=1)
    keep = (order != true) & (shares > 0)
    u = np.minimum(true[keep], order[keep])
    v = np.maximum(true[keep], order[keep])
    mass = np.zeros((n_categories, n_categories))
    np.add.at(mass, (u, v), shares[keep])
    rows, cols = np.nonzero(mass)
    edges = {(int(a), int(b)): float(mass[a, b]) for a, b in zip(rows, cols)}
    return ConfusionGraph(n_categories, names, edges, int(tau))


def write_graph(graph: ConfusionGraph, destination) -> None:
    tau = "none" if graph.tau is None else str(graph.tau)
    lines = [f"{GRAPH_HEADER} N={graph.n_categories} tau={tau}"]
    if graph.category_names != default_names(graph.n_categories):
        for i, name in enumerate(graph.category_names):
            lines.append(f"# name {i} {name}")
    for (u, v) in sorted(graph.edges):
        lines.append(f"{u} {v} {graph.edges[(u, v)]!r}")
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_graph(source) -> ConfusionGraph:
    path = Path(source)
    text = path.read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith(GRAPH_HEADER):
        raise FormatError("missing '# vclt-graph v1' header", line=1, source=path)
    meta = dict(tok.split("=", 1) for tok in text[0][len(GRAPH_HEADER):].split() if "=" in tok)
    try:
        n = int(meta["N"])
        tau = None if meta.get("tau", "none") == "none" else int(meta["tau"])
    except (KeyError, ValueError):
        raise FormatError("header needs N=<n> tau=<t>", line=1, source=path) from None
    names = list(default_names(n))
    edges: dict[tuple[int, int], float] = {}
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("# name "):
            parts = line[len("# name "):].split(" ", 1)
            try:
                idx = int(parts[0])
            except ValueError:
                raise FormatError(f"bad name line {line!r}", line=lineno, source=path) from None
            if not 0 <= idx < n:
                raise FormatError(f"unknown category index {idx}", line=lineno, source=path)
            names[idx] = parts[1] if len(parts) > 1 else ""
            continue
        if line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FormatError(f"expected '<u> <v> <weight>', got {line!r}", line=lineno, source=path)
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"unparsable edge {line!r}", line=lineno, source=path) from None
        if not (0 <= u < n and 0 <= v < n):
            raise FormatError(f"unknown category index in {line!r}", line=lineno, source=path)
        if u >= v:
            raise FormatError(f"edge must satisfy u < v, got {line!r}", line=lineno, source=path)
        if not math.isfinite(w) or w < 0:
            raise FormatError(f"negative or non-finite weight {parts[2]}", line=lineno, source=path)
        if (u, v) in edges:
            raise FormatError(f"duplicate edge {(u, v)}", line=lineno, source=path)
        edges[(u, v)] = w
    return ConfusionGraph(n, tuple(names), edges, tau)


def write_score_log(log: ScoreLog, destination) -> None:
    n = log.n_categories
    with open(destination, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "true_label"] + [f"score_{j}" for j in range(n)])
        for sid, lab, row in zip(log.sample_ids, log.labels, log.scores):
            writer.writerow([sid, int(lab)] + [repr(float(s)) for s in row])


def read_score_log(source) -> ScoreLog:
    path = Path(source)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty score log", line=1, source=path) from None
        n = len(header) - 2
        expected = ["sample_id", "true_label"] + [f"score_{j}" for j in range(n)]
        if n < 1 or header != expected:
            raise FormatError("header must be sample_id,true_label,score_0,...", line=1, source=path)
        ids, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 2:
                raise FormatError(f"expected {n + 2} fields, got {len(row)}", line=lineno, source=path)
            try:
                lab = int(row[1])
                vals = [float(s) for s in row[2:]]
            except ValueError:
                raise FormatError("unparsable number", line=lineno, source=path) from None
            if not 0 <= lab < n:
                raise FormatError(f"true_label {lab} out of range", line=lineno, source=path)
            if not all(math.isfinite(s) for s in vals):
                raise FormatError("non-finite score", line=lineno, source=path)
            ids.append(row[0])
            labels.append(lab)
            rows.append(vals)
    return ScoreLog(ids, np.asarray(labels, dtype=np.int64), np.asarray(rows, dtype=np.float64).reshape(-1, n))
