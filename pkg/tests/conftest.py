"""Shared fixtures and independent reference implementations used as test oracles."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from vclt.confusion_graph import ConfusionGraph, ScoreRecord, default_names


def confusion_oracle(records, n, tau):
    """Plain-Python single pass over the records, one dict update per contribution."""
    edges: dict[tuple[int, int], float] = {}
    for rec in records:
        ranked = sorted(range(n), key=lambda c: (-rec.scores[c], c))[:tau]
        vals = [rec.scores[c] for c in ranked]
        low = min(vals)
        if low < 0:
            vals = [v - low for v in vals]
        total = sum(vals)
        shares = [1.0 / tau] * tau if total <= 0 else [v / total for v in vals]
        for c, s in zip(ranked, shares):
            if c == rec.true_label or s <= 0:
                continue
            key = (min(c, rec.true_label), max(c, rec.true_label))
            edges[key] = edges.get(key, 0.0) + s
    return edges


def random_records(rng, n, count, negative=False):
    recs = []
    for i in range(count):
        s = rng.normal(size=n) if negative else rng.random(n)
        if rng.random() < 0.1:
            s = np.round(s, 1)  # force ties
        recs.append(ScoreRecord(str(i), int(rng.integers(n)), tuple(float(v) for v in s)))
    return recs


def modularity_oracle(A, labels):
    """Newman modularity from the textbook double sum."""
    A = np.asarray(A, dtype=float)
    k = A.sum(axis=1)
    two_m = k.sum()
    q = 0.0
    for i, j in itertools.product(range(len(A)), repeat=2):
        if labels[i] == labels[j]:
            q += A[i, j] - k[i] * k[j] / two_m
    return q / two_m


def graph_from_matrix(A) -> ConfusionGraph:
    A = np.asarray(A, dtype=float)
    n = len(A)
    edges = {(i, j): float(A[i, j]) for i in range(n) for j in range(i + 1, n) if A[i, j] > 0}
    return ConfusionGraph(n, default_names(n), edges, None)


def planted_graph(seed: int) -> ConfusionGraph:
    """Random planted-partition graph: dense heavy links inside groups, sparse light links across."""
    rng = np.random.default_rng(seed)
    while True:
        n = int(rng.integers(4, 9))
        k = int(rng.integers(2, 4))
        groups = rng.integers(k, size=n)
        A = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if groups[i] == groups[j]:
                    if rng.random() < 0.9:
                        A[i, j] = rng.uniform(0.5, 1.0)
                elif rng.random() < 0.3:
                    A[i, j] = rng.uniform(0.05, 0.3)
        A = A + A.T
        if A.sum() > 0:
            return graph_from_matrix(A)


def clique_bridge(size_a: int, size_b: int, bridge: float = 1.0) -> ConfusionGraph:
    n = size_a + size_b
    A = np.zeros((n, n))
    A[:size_a, :size_a] = 1.0
    A[size_a:, size_a:] = 1.0
    np.fill_diagonal(A, 0.0)
    A[size_a - 1, size_a] = A[size_a, size_a - 1] = bridge
    return graph_from_matrix(A)


def qp_dual_oracle(K, y, C):
    """Reference dense QP solve of the SVM dual with cvxopt; returns the dual value."""
    pytest.importorskip("cvxopt")
    from cvxopt import matrix, solvers

    n = len(y)
    P = matrix(np.outer(y, y) * K)
    q = matrix(-np.ones(n))
    G = matrix(np.vstack([-np.eye(n), np.eye(n)]))
    h = matrix(np.hstack([np.zeros(n), C * np.ones(n)]))
    A = matrix(y.reshape(1, -1).astype(float))
    b = matrix(0.0)
    solvers.options.update({"show_progress": False, "abstol": 1e-12, "reltol": 1e-12, "feastol": 1e-12})
    sol = solvers.qp(P, q, G, h, A, b)
    a = np.clip(np.asarray(sol["x"]).ravel(), 0.0, C)
    beta = a * y
    return float(a.sum() - 0.5 * beta @ K @ beta), a


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
