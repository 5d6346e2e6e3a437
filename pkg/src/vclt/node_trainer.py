"""Multi-kernel SVM training for the sibling groups of a label tree.

Each sibling group gets one-vs-rest scorers that share a convex kernel
combination. Training alternates exact SVM solves with a closed-form update
of the kernel weights, then optionally refines the scorers with a hinge
penalty that keeps each sample's own-child score above its parent's score.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataCoverageError, ParameterError
from .kernels import KernelCombination, KernelSpec, default_kernel_bank, gram_matrix, resolve_bank
from .svm import solve_svm_dual
from .tree import LabelTree

__all__ = [
    "TrainingConfig",
    "NodeClassifier",
    "SiblingGroupSamples",
    "SiblingGroupFit",
    "Standardizer",
    "TreeModel",
    "fit_sibling_group",
    "train_sibling_group",
    "score",
    "train_tree",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    C: float = 1.0
    lam: float = 1.0
    rho: float = 0.1
    mkl_iters: int = 5
    refine_epochs: int = 20
    tol: float = 1e-6
    step: float = 0.01

    def __post_init__(self):
        for name in ("C", "lam", "tol", "step"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.rho < 0:
            raise ParameterError(f"rho must be >= 0, got {self.rho}")
        if self.mkl_iters < 0 or self.refine_epochs < 0:
            raise ParameterError("mkl_iters and refine_epochs must be >= 0")


@dataclass
class NodeClassifier:
    """Scorer ``f(x) = sum_i dual_coefs[i] * K(sv_i, x) + bias`` for one child node.

    ``support_vectors`` holds the rows named by ``sv_indices`` so a scorer can
    be evaluated without the training matrix.
    """

    node_id: int
    level: int
    sv_indices: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelCombination
    support_vectors: np.ndarray | None = None

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.dual_coefs) == 0:
            return np.full(X.shape[0], self.bias)
        return gram_matrix(self.kernel, X, self.support_vectors) @ self.dual_coefs + self.bias


def score(classifier: NodeClassifier, training_features, x) -> float | np.ndarray:
    """Score one vector (or a batch) with the support vectors looked up in ``training_features``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if len(classifier.dual_coefs) == 0:
        out = np.full(X.shape[0], classifier.bias)
    else:
        sv = (
            classifier.support_vectors
            if training_features is None
            else np.asarray(training_features, dtype=float)[classifier.sv_indices]
        )
        if X.shape[1] != sv.shape[1]:
            raise ParameterError(f"feature dimension {X.shape[1]} != model dimension {sv.shape[1]}")
        out = gram_matrix(classifier.kernel, X, sv) @ classifier.dual_coefs + classifier.bias
    return float(out[0]) if single else out


@dataclass
class SiblingGroupSamples:
    """Training rows below one parent; ``targets[i]`` indexes ``child_ids``."""

    features: np.ndarray
    targets: np.ndarray
    child_ids: tuple[int, ...]
    level: int = 0
    sample_indices: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if len(self.features) != len(self.targets):
            raise ParameterError("features and targets differ in length")
        if self.sample_indices is None:
            self.sample_indices = np.arange(len(self.targets))


@dataclass
class SiblingGroupFit:
    classifiers: list[NodeClassifier]
    kernel: KernelCombination
    weight_history: list[np.ndarray] = field(default_factory=list)
    dual_history: list[float] = field(default_factory=list)
    duals: list[float] = field(default_factory=list)
    alphas: list[np.ndarray] = field(default_factory=list)
    violations_before: int | None = None
    violations_after: int | None = None

    @property
    def n_samples(self) -> int:
        return len(self.alphas[0]) if self.alphas else 0


def _one_vs_rest(targets: np.ndarray, j: int) -> np.ndarray:
    return np.where(targets == j, 1.0, -1.0)


def _count_violations(F: np.ndarray, targets: np.ndarray, parent: np.ndarray) -> int:
    own = F[np.arange(len(targets)), targets]
    return int(np.sum(own < parent))


def _refine(K, targets, betas, biases, parent, cfg):
    """Projected sub-gradient epochs on the SVM primal plus the inter-level hinge.

    The returned iterate is the one with the lowest penalized objective among
    the starting point and every epoch's iterate that has no more inter-level
    violations than the starting point.
    """
    n, R = len(targets), len(betas)
    Y = np.stack([_one_vs_rest(targets, j) for j in range(R)], axis=1)
    own = np.zeros((n, R), dtype=bool)
    own[np.arange(n), targets] = True
    B = np.stack(betas, axis=1)
    b = np.asarray(biases, dtype=float)

    def evaluate(B, b):
        F = K @ B + b
        hinge = np.maximum(0.0, 1.0 - Y * F)
        gap = np.maximum(0.0, parent[:, None] - F) * own
        reg = 0.5 * np.einsum("ir,ij,jr->", B, K, B)
        obj = cfg.lam * reg + cfg.C * hinge.sum() + cfg.rho * gap.sum()
        return F, _count_violations(F, targets, parent), obj

    F, viol0, obj = evaluate(B, b)
    best = (obj, B.copy(), b.copy())
    for epoch in range(1, cfg.refine_epochs + 1):
        eta = cfg.step / epoch
        margin_active = (Y * F) < 1.0
        order_active = own & (F < parent[:, None])
        # functional sub-gradient: coefficients of the kernel expansion
        g = -cfg.C * Y * margin_active - cfg.rho * order_active
        B = (1.0 - eta * cfg.lam) * B - eta * g
        A = np.clip(B * Y, 0.0, cfg.C)
        B = A * Y
        b = b - eta * g.mean(axis=0)
        F, viol, obj = evaluate(B, b)
        if viol <= viol0 and obj < best[0]:
            best = (obj, B.copy(), b.copy())
    _, B, b = best
    return [B[:, j].copy() for j in range(R)], list(b)


def fit_sibling_group(
    samples: SiblingGroupSamples,
    parent_scorer: NodeClassifier | None = None,
    cfg: TrainingConfig | None = None,
    kernels: Sequence[KernelSpec | str] | None = None,
    parent_scores: np.ndarray | None = None,
) -> SiblingGroupFit:
    """Train one scorer per child and keep the training diagnostics.

    ``parent_scores`` may replace ``parent_scorer`` when the parent's scores on
    these rows are already known.
    """
    cfg = cfg or TrainingConfig()
    X, t = samples.features, samples.targets
    R = len(samples.child_ids)
    if R < 2:
        raise ParameterError("a sibling group needs at least two children")
    if not np.all(np.isfinite(X)):
        raise ParameterError("non-finite feature value")
    if t.min(initial=0) < 0 or t.max(initial=0) >= R:
        raise ParameterError("target index outside the sibling group")
    counts = np.bincount(t, minlength=R)
    if np.any(counts == 0):
        empty = [samples.child_ids[j] for j in np.flatnonzero(counts == 0)]
        raise DataCoverageError(f"children {empty} have no training samples")

    specs = resolve_bank(kernels if kernels is not None else default_kernel_bank(), X)
    M = len(specs)
    grams = [gram_matrix(s, X) for s in specs]
    d = np.full(M, 1.0 / M)
    fit = SiblingGroupFit([], KernelCombination.uniform(specs), weight_history=[d.copy()])
    ys = [_one_vs_rest(t, j) for j in range(R)]
    alphas: list[np.ndarray | None] = [None] * R

    def solve_all(d):
        K = sum(w * G for w, G in zip(d, grams))
        sols = [solve_svm_dual(K, ys[j], cfg.C, cfg.tol, alpha0=alphas[j]) for j in range(R)]
        for j, s in enumerate(sols):
            alphas[j] = s.alpha
        return K, sols

    K, sols = solve_all(d)
    fit.dual_history.append(sum(s.objective for s in sols))
    for _ in range(cfg.mkl_iters):
        # ||f_m||^2 = d_m^2 * beta' K_m beta, summed over the group's scorers
        norms = np.array(
            [d[m] * np.sqrt(max(sum(s.coef @ grams[m] @ s.coef for s in sols), 0.0)) for m in range(M)]
        )
        if norms.sum() <= 0:
            break
        d = norms / norms.sum()
        fit.weight_history.append(d.copy())
        K, sols = solve_all(d)
        fit.dual_history.append(sum(s.objective for s in sols))

    comb = KernelCombination(specs, tuple(d))
    fit.kernel = comb
    fit.duals = [s.objective for s in sols]
    fit.alphas = [s.alpha.copy() for s in sols]
    betas = [s.coef.copy() for s in sols]
    biases = [s.bias for s in sols]

    if parent_scores is None and parent_scorer is not None:
        parent_scores = parent_scorer.decision_function(X)
    if parent_scores is not None:
        parent_scores = np.asarray(parent_scores, dtype=float)
        F = K @ np.stack(betas, axis=1) + np.asarray(biases)
        fit.violations_before = _count_violations(F, t, parent_scores)
        if cfg.rho > 0 and cfg.refine_epochs > 0:
            betas, biases = _refine(K, t, betas, biases, parent_scores, cfg)
        F = K @ np.stack(betas, axis=1) + np.asarray(biases)
        fit.violations_after = _count_violations(F, t, parent_scores)

    for j, child in enumerate(samples.child_ids):
        sv = np.flatnonzero(betas[j] != 0.0)
        fit.classifiers.append(
            NodeClassifier(
                node_id=child,
                level=samples.level,
                sv_indices=samples.sample_indices[sv],
                dual_coefs=betas[j][sv],
                bias=float(biases[j]),
                kernel=comb,
                support_vectors=X[sv],
            )
        )
    return fit


def train_sibling_group(
    samples: SiblingGroupSamples,
    parent_scorer: NodeClassifier | None = None,
    cfg: TrainingConfig | None = None,
    kernels: Sequence[KernelSpec | str] | None = None,
) -> list[NodeClassifier]:
    return fit_sibling_group(samples, parent_scorer, cfg, kernels).classifiers


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        scale = X.std(axis=0)
        scale[scale <= 0] = 1.0
        return cls(X.mean(axis=0), scale)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.shape[0]:
            raise ParameterError(f"feature dimension {X.shape[-1]} != model dimension {self.mean.shape[0]}")
        return (X - self.mean) / self.scale


@dataclass
class TreeModel:
    """A label tree with its trained scorers.

    ``support_features`` holds the standardized support vectors referenced by
    the scorers' ``sv_indices``; they are stored at float32 precision so a
    model read back from disk scores identically.
    """

    tree: LabelTree
    classifiers: dict[int, NodeClassifier]
    standardization: Standardizer
    kernel_bank: tuple[KernelSpec, ...]
    support_features: np.ndarray
    group_weights: dict[int, tuple[float, ...]] = field(default_factory=dict)
    diagnostics: dict[int, dict] = field(default_factory=dict, compare=False)

    @property
    def feature_dim(self) -> int:
        return int(self.standardization.mean.shape[0])

    @property
    def passthrough(self) -> list[int]:
        return [n.node_id for n in self.tree.nodes if len(n.children) == 1]


def _compact_support(classifiers: dict[int, NodeClassifier], Z: np.ndarray) -> np.ndarray:
    used = sorted({int(i) for c in classifiers.values() for i in c.sv_indices})
    remap = {old: new for new, old in enumerate(used)}
    sv = Z[used].astype(np.float32).astype(np.float64) if used else np.zeros((0, Z.shape[1]))
    for c in classifiers.values():
        c.sv_indices = np.asarray([remap[int(i)] for i in c.sv_indices], dtype=np.int64)
        c.support_vectors = sv[c.sv_indices]
    return sv


def train_tree(
    tree: LabelTree,
    features,
    labels,
    cfg: TrainingConfig | None = None,
    kernels: Sequence[KernelSpec | str] | None = None,
    n_jobs: int = 1,
) -> TreeModel:
    """Train every sibling group top-down, parents strictly before children.

    Groups at the same depth are independent once their parents are trained
    and run on ``n_jobs`` threads; results do not depend on scheduling.
    """
    cfg = cfg or TrainingConfig()
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ParameterError("features must be (n, d) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ParameterError("non-finite feature value")
    if y.min() < 0 or y.max() >= tree.n_categories:
        raise ParameterError(f"labels must lie in [0, {tree.n_categories})")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    bank = resolve_bank(kernels if kernels is not None else default_kernel_bank(), Z)

    classifiers: dict[int, NodeClassifier] = {}
    weights: dict[int, tuple[float, ...]] = {}
    diagnostics: dict[int, dict] = {}

    by_depth: dict[int, list] = {}
    for node in tree.internal_nodes():
        by_depth.setdefault(node.level, []).append(node)

    def train_group(node):
        if len(node.children) == 1:
            return node.node_id, None
        children = tuple(sorted(node.children))
        child_of_label = {}
        for j, c in enumerate(children):
            for lab in tree[c].label_set:
                child_of_label[lab] = j
        rows = np.flatnonzero(np.isin(y, sorted(node.label_set)))
        targets = np.array([child_of_label[lab] for lab in y[rows]], dtype=np.int64)
        samples = SiblingGroupSamples(Z[rows], targets, children, level=tree[children[0]].level, sample_indices=rows)
        parent = classifiers.get(node.node_id)
        try:
            fit = fit_sibling_group(samples, parent, cfg, bank)
        except (DataCoverageError, ParameterError) as exc:
            raise type(exc)(f"sibling group under node {node.node_id}: {exc}") from exc
        return node.node_id, fit

    with ThreadPoolExecutor(max_workers=max(1, n_jobs)) as pool:
        for depth in sorted(by_depth):
            for node_id, fit in pool.map(train_group, by_depth[depth]):
                if fit is None:
                    diagnostics[node_id] = {"passthrough": True}
                    continue
                for clf in fit.classifiers:
                    classifiers[clf.node_id] = clf
                weights[node_id] = fit.kernel.weights
                diagnostics[node_id] = {
                    "passthrough": False,
                    "n_samples": fit.n_samples,
                    "weight_history": [w.tolist() for w in fit.weight_history],
                    "dual_history": fit.dual_history,
                    "violations_before": fit.violations_before,
                    "violations_after": fit.violations_after,
                }
                log.debug("trained group %d: d=%s", node_id, np.round(fit.kernel.weights, 4))

    support = _compact_support(classifiers, Z)
    return TreeModel(tree, classifiers, std, bank, support, weights, diagnostics)
