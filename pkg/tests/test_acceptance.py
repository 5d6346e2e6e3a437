"""Acceptance suite: one PASS/FAIL line per criterion, with measured runtime.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import os
import sys
import time
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import clique_bridge, confusion_oracle, planted_graph, qp_dual_oracle, random_records  # noqa: E402
from vclt.classifier import evaluate_report, macro_accuracy  # noqa: E402
from vclt.cli import main as cli_main  # noqa: E402
from vclt.community import brute_force_best_partition, louvain_hierarchy  # noqa: E402
from vclt.confusion_graph import build_confusion_graph  # noqa: E402
from vclt.flops import FcLayerSpec, fc_multadds, speedup_report  # noqa: E402
from vclt.kernels import gram_matrix  # noqa: E402
from vclt.node_trainer import SiblingGroupSamples, TrainingConfig, fit_sibling_group, train_tree  # noqa: E402
from vclt.quality import CategoryDistances, three_category_scores, write_distances  # noqa: E402
from vclt.synthetic import (  # noqa: E402
    BlobSpec,
    cifar10_score_log,
    generate_blobs,
    generate_score_log,
    nearest_centroid_predict,
    supercluster_pairs,
)
from vclt.tree import build_vclt, validate_tree  # noqa: E402

RESULTS: list[str] = []


@contextmanager
def criterion(name: str, budget: float):
    """Time a criterion body, record one summary line, and re-raise failures."""
    notes: list[str] = []
    start = time.perf_counter()
    try:
        yield notes
    except AssertionError as exc:
        elapsed = time.perf_counter() - start
        detail = str(exc).splitlines()[0] if str(exc) else "assertion failed"
        RESULTS.append(f"FAIL  {name}  ({elapsed:.2f}s, budget {budget:g}s)  {detail}")
        raise
    elapsed = time.perf_counter() - start
    extra = f"  {'; '.join(notes)}" if notes else ""
    if elapsed >= budget:
        RESULTS.append(f"FAIL  {name}  ({elapsed:.2f}s exceeds budget {budget:g}s){extra}")
        raise AssertionError(f"{name}: runtime {elapsed:.2f}s exceeds {budget:g}s")
    RESULTS.append(f"PASS  {name}  ({elapsed:.2f}s, budget {budget:g}s){extra}")


def test_flop_accounting():
    with criterion("flop accounting reproduces the FC/tree table", 1.0) as notes:
        cifar_fc = [FcLayerSpec(4096, 4096), FcLayerSpec(4096, 100)]
        imagenet_fc = [FcLayerSpec(4096, 4096), FcLayerSpec(4096, 1000)]
        cifar = speedup_report(cifar_fc, 18, 4096)
        imagenet = speedup_report(imagenet_fc, 65, 4096)
        notes.append(f"cifar fc={cifar.fc_ops:,} tree={cifar.tree_ops:,} speedup={cifar.speedup:.1f}")
        notes.append(f"imagenet fc={imagenet.fc_ops:,} tree={imagenet.tree_ops:,} speedup={imagenet.speedup:.1f}")
        assert fc_multadds([FcLayerSpec(1, 1)]) == 2
        assert cifar.tree_ops == 147_456, cifar.tree_ops
        assert round(cifar.speedup) == 233, cifar.speedup
        assert imagenet.fc_ops == 41_746_432, imagenet.fc_ops
        assert round(imagenet.speedup) == 78, imagenet.speedup
        assert cifar.fc_ops == 34_385_920, (
            f"CIFAR-100 FC ops {cifar.fc_ops:,} != required 34,385,920 "
            f"(2*(4096*4096 + 4096*100) = {2 * (4096 * 4096 + 4096 * 100):,})"
        )


def test_tree_quality_properties():
    with criterion("three-category quality proxy: T1 beats T2 and T4", 1.0) as notes:
        rng = np.random.default_rng(2024)
        violations = 0
        for _ in range(1000):
            d_ab = rng.uniform(0.01, 10)
            d_ac = max(1.0, d_ab) + rng.uniform(1e-6, 10)
            d_bc = d_ac + rng.uniform(1e-6, 10)
            k = rng.uniform(0.01, 100)
            s = three_category_scores(d_ab, d_ac, d_bc, k)
            violations += not (s["T1"] > s["T2"] and s["T1"] > s["T4"])
        worst = 0.0
        for _ in range(100):
            d_ab = rng.uniform(0.01, 0.99)
            s = three_category_scores(d_ab, 1.0, 1.0 + rng.uniform(0.01, 5), rng.uniform(0.1, 10))
            worst = max(worst, abs(s["T1"] - s["T4"]))
        notes.append(f"violations={violations}/1000, max |T1-T4| at d_AC=1: {worst:.1e}")
        assert violations == 0
        assert worst <= 1e-12


def test_confusion_graph_oracle():
    with criterion("confusion graph matches brute-force accumulation", 5.0) as notes:
        rng = np.random.default_rng(77)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(2, 21))
            recs = random_records(rng, n, int(rng.integers(0, 501)), negative=bool(rng.random() < 0.3))
            tau = int(rng.integers(1, n + 1))
            g = build_confusion_graph(recs, n, tau)
            ref = confusion_oracle(recs, n, tau)
            assert set(g.edges) == set(ref), "edge sets differ"
            for e, w in ref.items():
                worst = max(worst, abs(g.edges[e] - w))
        notes.append(f"max edge error {worst:.1e}")
        assert worst <= 1e-12


def test_community_detection_oracle():
    with criterion("Louvain vs brute force, clique bridges, monotone levels", 30.0) as notes:
        below = []
        for seed in range(50):
            g = planted_graph(seed)
            h = louvain_hierarchy(g)
            qs = [level.modularity for level in h]
            assert all(b >= a - 1e-12 for a, b in zip(qs, qs[1:])), f"non-monotone levels on seed {seed}"
            best = brute_force_best_partition(g).modularity
            if qs[0] < 0.95 * best:
                below.append((seed, qs[0] / best if best else float("nan")))
        for a in range(3, 6):
            for b in range(3, 6):
                g = clique_bridge(a, b, 0.1)
                h = louvain_hierarchy(g)
                assert abs(h[0].modularity - brute_force_best_partition(g).modularity) <= 1e-12
                assert all(y.modularity >= x.modularity - 1e-12 for x, y in zip(h.levels, h.levels[1:]))
        notes.append("clique bridges exact, levels monotone")
        worst = min(r for _, r in below) if below else 1.0
        assert not below, (
            f"level-1 modularity below 0.95x optimum on {len(below)}/50 graphs "
            f"(worst ratio {worst:.3f}, seeds {[s for s, _ in below]})"
        )


def test_cifar10_shape_recovery():
    with criterion("CIFAR-10-style log yields the 18-node tree", 5.0) as notes:
        g = build_confusion_graph(cifar10_score_log(seed=0), 10, 3)
        tree = build_vclt(louvain_hierarchy(g))
        sizes = [len(layer) for layer in tree.layers]
        notes.append(f"layer sizes {sizes}")
        assert validate_tree(tree) == []
        assert sizes == [1, 2, 5, 10] and len(tree) == 18


def test_svm_solver_oracle():
    with criterion("sibling-group SVM duals match a reference QP", 60.0) as notes:
        rng = np.random.default_rng(99)
        worst = 0.0
        for g in range(25):
            n = int(rng.integers(6, 21))
            R = int(rng.integers(2, 4))
            t = np.concatenate([np.arange(R), rng.integers(R, size=n - R)])
            X = rng.normal(size=(n, 3)) + 1.5 * t[:, None]
            fit = fit_sibling_group(SiblingGroupSamples(X, t, tuple(range(R))), cfg=TrainingConfig(mkl_iters=3))
            for d in fit.weight_history:
                assert np.all(d >= 0) and abs(d.sum() - 1) <= 1e-9, f"simplex violated in group {g}"
            K = gram_matrix(fit.kernel, X)
            for j in range(R):
                a = fit.alphas[j]
                assert np.all(a >= 0) and np.all(a <= 1.0), f"box violated in group {g}"
                ref, _ = qp_dual_oracle(K, np.where(t == j, 1.0, -1.0), 1.0)
                worst = max(worst, abs(fit.duals[j] - ref))
        notes.append(f"max |dual - QP| {worst:.1e}")
        assert worst <= 1e-4


@lru_cache(maxsize=None)
def blobs_run(seed: int):
    data = generate_blobs(BlobSpec(seed=seed))
    log = generate_score_log(data.X_train, data.y_train, 0.05, supercluster_pairs(data.supercluster_of, 0.2), 16, seed)
    tree = build_vclt(louvain_hierarchy(build_confusion_graph(log, 16, 3)))
    model = train_tree(tree, data.X_train, data.y_train)
    return data, model


def test_hierarchical_constraint():
    with criterion("refinement never increases parent-score violations", 120.0) as notes:
        exceptions = []
        total_before = total_after = 0
        for seed in range(10):
            _, model = blobs_run(seed)
            for node_id, diag in model.diagnostics.items():
                if diag.get("violations_before") is None:
                    continue
                total_before += diag["violations_before"]
                total_after += diag["violations_after"]
                if diag["violations_after"] > diag["violations_before"]:
                    exceptions.append((seed, node_id))
        notes.append(f"violations before={total_before} after={total_after}")
        assert not exceptions, f"violation count increased in {exceptions}"


def test_end_to_end_quality_floor():
    with criterion("tree MA >= nearest-centroid MA on >= 9/10 seeds", 300.0) as notes:
        wins = 0
        routing_ok = True
        rows = []
        for seed in range(10):
            data, model = blobs_run(seed)
            rep = evaluate_report(model, data.X_test, data.y_test)
            nc = macro_accuracy(data.y_test, nearest_centroid_predict(data.X_train, data.y_train, data.X_test), 16)
            wins += rep["mean_accuracy"] >= nc
            routing_ok &= rep["routing_accuracy"][2] >= rep["pooled_accuracy"]
            rows.append(f"{seed}:{rep['mean_accuracy']:.2f}/{nc:.2f}")
        notes.append(f"tree/NC MA per seed {' '.join(rows)}")
        assert routing_ok, "root routing accuracy below end-to-end accuracy"
        assert wins >= 9, f"tree MA >= NC MA on only {wins}/10 seeds ({' '.join(rows)})"


def _pipeline(base: Path) -> dict[str, bytes]:
    # relative paths, so outputs that echo file names are comparable across runs
    base.mkdir(parents=True)
    cwd = os.getcwd()
    os.chdir(base)
    try:
        return _run_steps(Path("."))
    finally:
        os.chdir(cwd)


def _run_steps(root: Path) -> dict[str, bytes]:
    d = root / "d"
    steps = [
        ["--seed", "4", "synth", "--out-dir", d],
        ["build-graph", "--scores", d / "scores.csv", "--out", root / "g.txt"],
        ["detect", "--graph", root / "g.txt", "--out", root / "h.txt"],
        ["build-tree", "--hierarchy", root / "h.txt", "--graph", root / "g.txt", "--out", root / "t.json"],
        ["--threads", "2", "train", "--tree", root / "t.json", "--features", d / "train.csv", "--out", root / "m.json",
         "--diagnostics", root / "diag.json"],
        ["predict", "--model", root / "m.json", "--features", d / "test.csv", "--out", root / "p.csv"],
        ["evaluate", "--model", root / "m.json", "--features", d / "test.csv", "--out", root / "r.json"],
        ["flops", "--out", root / "flops.txt"],
        ["flops", "--tree", root / "t.json", "--fc", "8x8,8x16", "--feature-dim", "8", "--out", root / "flops2.txt"],
        ["synth", "--kind", "cifar10", "--out-dir", root / "f"],
    ]
    write_distances(root / "dist.csv", CategoryDistances(np.abs(np.subtract.outer(np.arange(16), np.arange(16))) + 0.0))
    for argv in steps:
        code = cli_main([str(a) for a in argv])
        assert code == 0, f"command failed: {argv}"
    code = cli_main(["compare-trees", "--distances", str(root / "dist.csv"), str(root / "t.json"), str(root / "t.json"),
                     "--out", str(root / "cmp.txt")])
    assert code == 0
    return {str(p): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_cli_determinism(tmp_path, capsys):
    with criterion("CLI outputs are byte-identical on re-run", 300.0) as notes:
        a = _pipeline(tmp_path / "a")
        b = _pipeline(tmp_path / "b")
        capsys.readouterr()
        notes.append(f"{len(a)} files compared")
        assert a.keys() == b.keys()
        differ = [k for k in a if a[k] != b[k]]
        assert not differ, f"files differ: {differ}"


if __name__ == "__main__":
    import tempfile

    failures = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_") or not callable(fn):
            continue
        try:
            if name == "test_cli_determinism":
                with tempfile.TemporaryDirectory() as tmp:
                    class _Null:
                        def readouterr(self):
                            return None
                    fn(Path(tmp), _Null())
            else:
                fn()
        except AssertionError:
            failures += 1
        except pytest.skip.Exception:
            RESULTS.append(f"SKIP  {name}")
    print("\n".join(RESULTS))
    sys.exit(1 if failures else 0)
