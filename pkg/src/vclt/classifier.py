"""Top-down inference over a trained tree, evaluation, and model files."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EvaluationError, FormatError, InvariantError, ParameterError
from .kernels import KernelCombination, format_kernel, parse_kernel
from .node_trainer import NodeClassifier, Standardizer, TreeModel
from .tree import tree_from_dict, tree_to_dict

__all__ = [
    "Prediction",
    "predict",
    "predict_batch",
    "mean_accuracy",
    "macro_accuracy",
    "evaluate_report",
    "save_model",
    "load_model",
    "write_support_vectors",
    "read_support_vectors",
]

SV_MAGIC = b"VCLTSV1"


@dataclass(frozen=True)
class Prediction:
    label: int
    path: tuple[int, ...]
    scores_along_path: tuple[dict[int, float], ...]


def _check_model(model: TreeModel):
    for node in model.tree.internal_nodes():
        if len(node.children) > 1:
            missing = [c for c in node.children if c not in model.classifiers]
            if missing:
                raise InvariantError(f"model has no scorer for children {missing} of node {node.node_id}")


def predict_batch(model: TreeModel, X) -> list[Prediction]:
    """Route every row from the root to a leaf.

    At each internal node the children's scorers are evaluated and the row
    descends into the best-scoring child; equal scores go to the lowest node
    id. Single-child nodes are passed through without scoring.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.feature_dim:
        raise ParameterError(f"feature dimension {X.shape[1]} != model dimension {model.feature_dim}")
    _check_model(model)
    Z = model.standardization.transform(X)
    tree = model.tree
    n = len(Z)
    paths: list[list[int]] = [[tree.root.node_id] for _ in range(n)]
    steps: list[list[dict[int, float]]] = [[] for _ in range(n)]

    frontier = {tree.root.node_id: np.arange(n)}
    while frontier:
        nxt: dict[int, list[np.ndarray]] = {}
        for node_id in sorted(frontier):
            rows = frontier[node_id]
            node = tree[node_id]
            if not node.children:
                continue
            children = sorted(node.children)
            if len(children) == 1:
                dest = np.full(len(rows), children[0])
                scores = None
            else:
                scores = np.stack([model.classifiers[c].decision_function(Z[rows]) for c in children], axis=1)
                dest = np.asarray(children)[np.argmax(scores, axis=1)]
            for k, r in enumerate(rows):
                paths[r].append(int(dest[k]))
                steps[r].append({} if scores is None else {c: float(s) for c, s in zip(children, scores[k])})
            for c in children:
                sel = rows[dest == c]
                if len(sel):
                    nxt.setdefault(c, []).append(sel)
        frontier = {c: np.concatenate(v) for c, v in nxt.items()}

    out = []
    for r in range(n):
        leaf = tree[paths[r][-1]]
        out.append(Prediction(next(iter(leaf.label_set)), tuple(paths[r]), tuple(steps[r])))
    return out


def predict(model: TreeModel, x) -> Prediction:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("predict takes one feature vector; use predict_batch for many")
    return predict_batch(model, x[None, :])[0]


def macro_accuracy(y_true, y_pred, n_classes: int | None = None) -> float:
    """Mean over classes of per-class accuracy, in percent."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) == 0:
        raise EvaluationError("empty test set")
    classes = range(n_classes) if n_classes is not None else np.unique(y_true)
    accs = []
    for c in classes:
        mask = y_true == c
        if not mask.any():
            raise EvaluationError(f"class {c} has no test samples")
        accs.append(np.mean(y_pred[mask] == c))
    return 100.0 * float(np.mean(accs))


def mean_accuracy(model: TreeModel, X, y) -> float:
    preds = predict_batch(model, X)
    return macro_accuracy(y, [p.label for p in preds], model.tree.n_categories)


def evaluate_report(model: TreeModel, X, y, predictions: list[Prediction] | None = None) -> dict:
    """Macro and pooled accuracy, per-class accuracy, per-layer routing accuracy, confusion counts.

    Routing accuracy at layer ``l`` is the fraction of samples whose path node
    at that layer contains their true label.
    """
    y = np.asarray(y, dtype=np.int64)
    preds = predictions if predictions is not None else predict_batch(model, X)
    pred = np.asarray([p.label for p in preds], dtype=np.int64)
    N = model.tree.n_categories
    ma = macro_accuracy(y, pred, N)
    confusion = np.zeros((N, N), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    per_class = {
        int(c): {
            "n": int(confusion[c].sum()),
            "correct": int(confusion[c, c]),
            "accuracy": 100.0 * float(confusion[c, c] / confusion[c].sum()),
        }
        for c in range(N)
    }
    tree = model.tree
    routing = {}
    for layer in range(2, tree.depth + 1):
        ok = sum(y[i] in tree[p.path[layer - 1]].label_set for i, p in enumerate(preds))
        routing[layer] = 100.0 * ok / len(y)
    return {
        "n_samples": int(len(y)),
        "mean_accuracy": ma,
        "pooled_accuracy": 100.0 * float(np.mean(pred == y)),
        "per_class": per_class,
        "routing_accuracy": routing,
        "confusion": confusion.tolist(),
    }


def write_support_vectors(destination, features: np.ndarray) -> None:
    F = np.asarray(features, dtype="<f4")
    n, dim = F.shape if F.ndim == 2 else (0, 0)
    with open(destination, "wb") as fh:
        fh.write(SV_MAGIC)
        fh.write(struct.pack("<II", n, dim))
        fh.write(F.tobytes(order="C"))


def read_support_vectors(source) -> np.ndarray:
    raw = Path(source).read_bytes()
    if raw[: len(SV_MAGIC)] != SV_MAGIC:
        raise FormatError("bad magic, expected VCLTSV1", source=source)
    head = len(SV_MAGIC)
    if len(raw) < head + 8:
        raise FormatError("truncated header", source=source)
    n, dim = struct.unpack("<II", raw[head: head + 8])
    body = raw[head + 8:]
    if len(body) != 4 * n * dim:
        raise FormatError(f"expected {n}x{dim} float32 values, found {len(body)} bytes", source=source)
    return np.frombuffer(body, dtype="<f4").reshape(n, dim).astype(np.float64)


def save_model(model: TreeModel, destination, sv_destination=None) -> Path:
    """Write the model JSON and its support-vector file (``<destination>.sv`` by default)."""
    dest = Path(destination)
    sv_path = Path(sv_destination) if sv_destination is not None else dest.with_name(dest.name + ".sv")
    write_support_vectors(sv_path, model.support_features)
    groups = {}
    for node in model.tree.internal_nodes():
        if len(node.children) < 2:
            continue
        first = model.classifiers[min(node.children)]
        groups[str(node.node_id)] = {
            "kernels": [format_kernel(s) for s in first.kernel.specs],
            "weights": list(first.kernel.weights),
            "scorers": [
                {
                    "node": c,
                    "level": model.classifiers[c].level,
                    "bias": model.classifiers[c].bias,
                    "sv": model.classifiers[c].sv_indices.tolist(),
                    "coef": model.classifiers[c].dual_coefs.tolist(),
                }
                for c in sorted(node.children)
            ],
        }
    doc = {
        "format": "vclt-model v1",
        "support_vectors": sv_path.name,
        "tree": tree_to_dict(model.tree),
        "standardization": {
            "mean": model.standardization.mean.tolist(),
            "scale": model.standardization.scale.tolist(),
        },
        "kernel_bank": [format_kernel(s) for s in model.kernel_bank],
        "groups": groups,
    }
    dest.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return sv_path


def load_model(source, sv_source=None) -> TreeModel:
    path = Path(source)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, line=exc.lineno, source=path) from None
    if doc.get("format") != "vclt-model v1":
        raise FormatError("not a vclt-model v1 file", source=path)
    sv_path = Path(sv_source) if sv_source is not None else path.with_name(doc["support_vectors"])
    sv = read_support_vectors(sv_path)
    tree = tree_from_dict(doc["tree"], source=path)
    try:
        std = Standardizer(np.asarray(doc["standardization"]["mean"]), np.asarray(doc["standardization"]["scale"]))
        bank = tuple(parse_kernel(k) for k in doc["kernel_bank"])
        classifiers = {}
        weights = {}
        for gid, g in doc["groups"].items():
            comb = KernelCombination(tuple(parse_kernel(k) for k in g["kernels"]), tuple(g["weights"]))
            weights[int(gid)] = comb.weights
            for s in g["scorers"]:
                idx = np.asarray(s["sv"], dtype=np.int64)
                if idx.size and (idx.min() < 0 or idx.max() >= len(sv)):
                    raise FormatError(f"scorer {s['node']} references missing support vector", source=path)
                classifiers[int(s["node"])] = NodeClassifier(
                    int(s["node"]), int(s["level"]), idx, np.asarray(s["coef"], dtype=float),
                    float(s["bias"]), comb, sv[idx],
                )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed model: {exc}", source=path) from None
    if np.any(std.scale <= 0):
        raise FormatError("standardization scale must be positive", source=path)
    return TreeModel(tree, classifiers, std, bank, sv, weights)
