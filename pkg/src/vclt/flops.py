"""Multiply-add accounting for dense classifier heads versus a label tree."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import NumericError, ParameterError
from .tree import LabelTree

__all__ = [
    "FcLayerSpec",
    "FlopReport",
    "fc_multadds",
    "tree_multadds",
    "worst_path_classifiers",
    "speedup_report",
    "PRESETS",
    "preset_report",
    "format_table",
]

OPS_PER_MULTADD = 2


@dataclass(frozen=True)
class FcLayerSpec:
    in_dim: int
    out_dim: int
    with_bias: bool = False

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ParameterError(f"layer dimensions must be >= 1, got {self.in_dim}x{self.out_dim}")


@dataclass(frozen=True)
class FlopReport:
    fc_ops: int
    tree_ops: int
    speedup: float
    convention: int = OPS_PER_MULTADD


def fc_multadds(layers: Sequence[FcLayerSpec], factor: int = OPS_PER_MULTADD) -> int:
    if not layers:
        raise ParameterError("need at least one layer")
    total = 0
    for layer in layers:
        total += factor * layer.in_dim * layer.out_dim
        if layer.with_bias:
            total += layer.out_dim
    return total


def worst_path_classifiers(tree: LabelTree) -> int:
    """Largest sum of sibling-group sizes met on any root-to-leaf path."""
    best: dict[int, int] = {}

    def walk(node_id: int) -> int:
        node = tree[node_id]
        if not node.children:
            return 0
        if node_id not in best:
            best[node_id] = len(node.children) + max(walk(c) for c in node.children)
        return best[node_id]

    return walk(tree.root.node_id)


def tree_multadds(tree: LabelTree | int, feature_dim: int, factor: int = OPS_PER_MULTADD) -> int:
    """Ops for one top-down pass; ``tree`` may also be the classifier count directly."""
    if feature_dim < 1:
        raise ParameterError(f"feature_dim must be >= 1, got {feature_dim}")
    n = tree if isinstance(tree, int) else worst_path_classifiers(tree)
    if n < 0:
        raise ParameterError("classifier count must be >= 0")
    return factor * n * feature_dim


def speedup_report(
    fc: Sequence[FcLayerSpec],
    tree: LabelTree | int,
    feature_dim: int,
    factor: int = OPS_PER_MULTADD,
) -> FlopReport:
    fc_ops = fc_multadds(fc, factor)
    tree_ops = tree_multadds(tree, feature_dim, factor)
    if tree_ops == 0:
        raise NumericError("tree has no classifiers, speedup undefined")
    return FlopReport(fc_ops, tree_ops, fc_ops / tree_ops, factor)


# AlexNet-style FC7 + FC8 heads with the worst-path classifier counts of the trees
PRESETS = {
    "cifar100": ((FcLayerSpec(4096, 4096), FcLayerSpec(4096, 100)), 18, 4096),
    "imagenet": ((FcLayerSpec(4096, 4096), FcLayerSpec(4096, 1000)), 65, 4096),
}


def preset_report(name: str) -> FlopReport:
    try:
        layers, n, d = PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return speedup_report(layers, n, d)


def format_table(rows: Sequence[tuple[str, FlopReport]]) -> str:
    """Plain-text table: one FC row and one tree row per configuration."""
    lines = [f"{'classifier':<12}{'dataset':<12}{'ops':>14}{'ops (M)':>10}{'speedup':>10}"]
    for name, rep in rows:
        lines.append(f"{'fc':<12}{name:<12}{rep.fc_ops:>14,}{rep.fc_ops / 1e6:>10.2f}{'1x':>10}")
        lines.append(
            f"{'tree':<12}{name:<12}{rep.tree_ops:>14,}{rep.tree_ops / 1e6:>10.2f}{f'{round(rep.speedup)}x':>10}"
        )
    return "\n".join(lines) + "\n"
