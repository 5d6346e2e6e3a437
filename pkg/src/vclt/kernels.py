"""Base kernels and their convex combinations."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvariantError, ParameterError

__all__ = [
    "KernelSpec",
    "KernelCombination",
    "eval_kernel",
    "combined_kernel",
    "gram_matrix",
    "parse_kernel",
    "format_kernel",
    "default_kernel_bank",
    "resolve_bank",
]

KINDS = ("linear", "polynomial", "gaussian")
SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class KernelSpec:
    """A base kernel.

    ``gamma=None`` on a gaussian kernel means "pick from the training data";
    call :meth:`resolve` before evaluating it.
    """

    kind: str
    degree: int = 2
    coef0: float = 1.0
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and self.degree < 1:
            raise ParameterError(f"polynomial degree must be >= 1, got {self.degree}")
        if self.kind == "gaussian" and self.gamma is not None and not self.gamma > 0:
            raise ParameterError(f"gaussian gamma must be > 0, got {self.gamma}")

    def resolve(self, X: np.ndarray) -> "KernelSpec":
        if self.kind != "gaussian" or self.gamma is not None:
            return self
        X = np.asarray(X, dtype=float)
        var = float(X.var(axis=0).mean()) if X.size else 0.0
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return replace(self, gamma=gamma)


@dataclass(frozen=True)
class KernelCombination:
    specs: tuple[KernelSpec, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.specs) != len(self.weights) or not self.specs:
            raise InvariantError("kernel combination needs one weight per kernel")
        w = np.asarray(self.weights)
        if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise InvariantError(f"kernel weights {self.weights} are not on the simplex")

    @classmethod
    def uniform(cls, specs: Sequence[KernelSpec]) -> "KernelCombination":
        return cls(tuple(specs), tuple([1.0 / len(specs)] * len(specs)))


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def _unresolved(spec: KernelSpec):
    if spec.kind == "gaussian" and spec.gamma is None:
        raise ParameterError("gaussian kernel with gamma='auto' must be resolved on data first")


def eval_kernel(spec: KernelSpec, x, y) -> float:
    _unresolved(spec)
    x, y = _check_pair(x, y)
    if spec.kind == "linear":
        return float(x @ y)
    if spec.kind == "polynomial":
        return float((x @ y + spec.coef0) ** spec.degree)
    diff = x - y
    return float(np.exp(-spec.gamma * (diff @ diff)))


def combined_kernel(comb: KernelCombination, x, y) -> float:
    return float(sum(w * eval_kernel(s, x, y) for s, w in zip(comb.specs, comb.weights)))


def _gram_single(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    _unresolved(spec)
    if spec.kind == "gaussian":
        return np.exp(-spec.gamma * cdist(X, Y, "sqeuclidean"))
    G = X @ Y.T
    if spec.kind == "polynomial":
        G = (G + spec.coef0) ** spec.degree
    return G


def gram_matrix(kernel: KernelSpec | KernelCombination, X, Y=None) -> np.ndarray:
    """Kernel matrix between the rows of ``X`` and ``Y`` (``Y`` defaults to ``X``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    same = Y is None
    Y = X if same else np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ParameterError(f"feature dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    if isinstance(kernel, KernelCombination):
        G = sum(w * _gram_single(s, X, Y) for s, w in zip(kernel.specs, kernel.weights) if w > 0)
        if np.isscalar(G):
            G = np.zeros((X.shape[0], Y.shape[0]))
    else:
        G = _gram_single(kernel, X, Y)
    if same:
        # BLAS products are not bit-symmetric
        G = 0.5 * (G + G.T)
    return G


def parse_kernel(text: str) -> KernelSpec:
    """Parse ``linear``, ``poly:<degree>:<coef0>`` or ``rbf:<gamma|auto>``."""
    parts = text.strip().split(":")
    head = parts[0].lower()
    try:
        if head == "linear" and len(parts) == 1:
            return KernelSpec("linear")
        if head in ("poly", "polynomial") and len(parts) <= 3:
            degree = int(parts[1]) if len(parts) > 1 else 2
            coef0 = float(parts[2]) if len(parts) > 2 else 1.0
            return KernelSpec("polynomial", degree=degree, coef0=coef0)
        if head in ("rbf", "gaussian") and len(parts) <= 2:
            g = parts[1] if len(parts) > 1 else "auto"
            return KernelSpec("gaussian", gamma=None if g == "auto" else float(g))
    except ValueError:
        pass
    raise ParameterError(f"cannot parse kernel {text!r}")


def format_kernel(spec: KernelSpec) -> str:
    if spec.kind == "linear":
        return "linear"
    if spec.kind == "polynomial":
        return f"poly:{spec.degree}:{spec.coef0!r}"
    return "rbf:auto" if spec.gamma is None else f"rbf:{spec.gamma!r}"


def default_kernel_bank() -> tuple[KernelSpec, ...]:
    return (KernelSpec("linear"), KernelSpec("polynomial", degree=2, coef0=1.0), KernelSpec("gaussian"))


def resolve_bank(bank: Sequence[KernelSpec | str], X) -> tuple[KernelSpec, ...]:
    specs = [parse_kernel(k) if isinstance(k, str) else k for k in bank]
    if not specs:
        raise ParameterError("kernel bank is empty")
    return tuple(s.resolve(X) for s in specs)
