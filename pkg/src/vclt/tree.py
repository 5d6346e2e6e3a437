"""Label tree data model and its construction from a partition hierarchy."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .community import PartitionHierarchy
from .errors import FormatError, InvariantError, ParameterError

__all__ = ["TreeNode", "LabelTree", "build_vclt", "validate_tree", "write_tree", "read_tree"]


@dataclass(frozen=True)
class TreeNode:
    node_id: int
    level: int
    label_set: frozenset[int]
    parent: int | None
    children: tuple[int, ...] = ()
    name: str = ""

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class LabelTree:
    """Layered label tree. Layer 1 holds the root, the last layer the leaves.

    ``nodes[i].node_id == i``; leaves carry ids ``0..n_categories-1`` when the
    tree was produced by :func:`build_vclt`.
    """

    n_categories: int
    nodes: tuple[TreeNode, ...]
    _leaf_of: dict[int, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        leaf_of = {}
        for node in self.nodes:
            if node.is_leaf and len(node.label_set) == 1:
                leaf_of[next(iter(node.label_set))] = node.node_id
        object.__setattr__(self, "_leaf_of", leaf_of)

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    @property
    def root(self) -> TreeNode:
        roots = [n for n in self.nodes if n.parent is None]
        if len(roots) != 1:
            raise InvariantError(f"tree has {len(roots)} roots")
        return roots[0]

    @property
    def depth(self) -> int:
        return max(n.level for n in self.nodes)

    @property
    def layers(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.depth)]
        for n in self.nodes:
            out[n.level - 1].append(n.node_id)
        return out

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(n.node_id, c) for n in self.nodes for c in n.children]

    def leaf_for(self, category: int) -> TreeNode:
        return self.nodes[self._leaf_of[category]]

    def path_to(self, category: int) -> list[int]:
        """Node ids from the root down to the leaf of ``category``."""
        path = [self._leaf_of[category]]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return path[::-1]

    def internal_nodes(self) -> Iterator[TreeNode]:
        """Internal nodes in breadth-first order from the root."""
        queue = deque([self.root.node_id])
        while queue:
            node = self.nodes[queue.popleft()]
            if node.children:
                yield node
                queue.extend(sorted(node.children))

    def child_containing(self, node_id: int, category: int) -> int:
        for c in self.nodes[node_id].children:
            if category in self.nodes[c].label_set:
                return c
        raise InvariantError(f"category {category} not below node {node_id}")


def build_vclt(hierarchy: PartitionHierarchy, category_names: Sequence[str] | None = None) -> LabelTree:
    if len(hierarchy) == 0:
        raise ParameterError("hierarchy has no levels")
    levels = [[frozenset(c) for c in level.communities] for level in hierarchy]
    n = len(hierarchy[0].community_of)
    for i, sets in enumerate(levels, start=1):
        covered = sorted(v for s in sets for v in s)
        if covered != list(range(n)):
            raise InvariantError(f"level {i} label sets do not partition categories 0..{n - 1}")
    for i in range(1, len(levels)):
        finer, coarser = levels[i - 1], levels[i]
        last = i == len(levels) - 1
        if len(coarser) > len(finer) or (len(coarser) == len(finer) and not last):
            raise InvariantError(f"level {i + 1} does not coarsen level {i}")
        for s in finer:
            if not any(s <= t for t in coarser):
                raise InvariantError(f"level {i} community {sorted(s)} is split at level {i + 1}")
    names = list(category_names) if category_names is not None else [str(c) for c in range(n)]
    if len(names) != n:
        raise ParameterError(f"{len(names)} names for {n} categories")

    synthetic_root = len(levels[-1]) > 1
    n_layers = len(levels) + 1 + int(synthetic_root)
    # level index of hierarchy level i (1-based) counted from the root layer
    layer_of_level = {i: n_layers - i for i in range(len(levels) + 1)}

    ids: list[list[int]] = [list(range(n))]
    next_id = n
    for sets in levels:
        ids.append(list(range(next_id, next_id + len(sets))))
        next_id += len(sets)
    all_sets: list[list[frozenset[int]]] = [[frozenset([c]) for c in range(n)]] + levels

    parent: dict[int, int | None] = {}
    children: dict[int, list[int]] = {}
    for i in range(len(all_sets) - 1):
        for nid, s in zip(ids[i], all_sets[i]):
            up = next(pid for pid, t in zip(ids[i + 1], all_sets[i + 1]) if s <= t)
            parent[nid] = up
            children.setdefault(up, []).append(nid)
    top = ids[-1]
    if synthetic_root:
        root_id = next_id
        for nid in top:
            parent[nid] = root_id
        children[root_id] = list(top)
        parent[root_id] = None
    else:
        parent[top[0]] = None

    nodes = []
    for i, (level_ids, sets) in enumerate(zip(ids, all_sets)):
        for nid, s in zip(level_ids, sets):
            name = names[nid] if i == 0 else f"level{layer_of_level[i]}"
            nodes.append(TreeNode(nid, layer_of_level[i], s, parent[nid], tuple(children.get(nid, ())), name))
    if synthetic_root:
        nodes.append(TreeNode(next_id, 1, frozenset(range(n)), None, tuple(top), "level1"))
    return LabelTree(n, tuple(nodes))


def validate_tree(tree: LabelTree) -> list[str]:
    """All violated tree invariants, as human-readable strings naming node ids."""
    problems: list[str] = []
    nodes = tree.nodes
    by_id = {}
    for pos, node in enumerate(nodes):
        if node.node_id != pos:
            problems.append(f"node at position {pos} has id {node.node_id}")
        by_id[node.node_id] = node
    roots = [n.node_id for n in nodes if n.parent is None]
    if len(roots) == 0:
        problems.append("no root")
    elif len(roots) > 1:
        problems.append(f"multiple roots: {roots}")
    for node in nodes:
        if not node.label_set:
            problems.append(f"node {node.node_id}: empty label set")
        if node.parent is not None:
            p = by_id.get(node.parent)
            if p is None:
                problems.append(f"node {node.node_id}: parent {node.parent} does not exist")
            else:
                if node.node_id not in p.children:
                    problems.append(f"node {node.node_id}: parent {p.node_id} does not list it as a child")
                if node.level != p.level + 1:
                    problems.append(f"node {node.node_id}: level {node.level} under parent level {p.level}")
        for c in node.children:
            child = by_id.get(c)
            if child is None:
                problems.append(f"node {node.node_id}: child {c} does not exist")
            elif child.parent != node.node_id:
                problems.append(f"node {node.node_id}: child {c} names parent {child.parent}")
        if node.children:
            union = frozenset().union(*(by_id[c].label_set for c in node.children if c in by_id))
            if union != node.label_set:
                problems.append(f"node {node.node_id}: label set differs from the union of its children's")
        elif len(node.label_set) != 1:
            problems.append(f"node {node.node_id}: leaf label set has {len(node.label_set)} categories")
    leaf_labels = sorted(next(iter(n.label_set)) for n in nodes if not n.children and len(n.label_set) == 1)
    if leaf_labels != list(range(tree.n_categories)):
        problems.append(f"leaves do not biject with categories 0..{tree.n_categories - 1}")
    if len(roots) == 1 and roots[0] in by_id:
        seen = set()
        stack = [roots[0]]
        while stack:
            nid = stack.pop()
            if nid in seen:
                problems.append(f"node {nid}: reached twice (cycle or shared child)")
                continue
            seen.add(nid)
            stack.extend(c for c in by_id[nid].children if c in by_id)
        missing = sorted(set(by_id) - seen)
        if missing:
            problems.append(f"nodes unreachable from the root: {missing}")
    if not problems:
        full = frozenset(range(tree.n_categories))
        for depth, layer in enumerate(tree.layers, start=1):
            sets = [by_id[i].label_set for i in layer]
            if sum(len(s) for s in sets) != len(full) or frozenset().union(*sets) != full:
                problems.append(f"layer {depth}: label sets do not partition the categories")
    return problems


def tree_to_dict(tree: LabelTree) -> dict:
    return {
        "n_categories": tree.n_categories,
        "nodes": [
            {
                "id": n.node_id,
                "level": n.level,
                "labels": sorted(n.label_set),
                "parent": n.parent,
                "children": list(n.children),
                "name": n.name,
            }
            for n in tree.nodes
        ],
    }


def tree_from_dict(data: dict, source=None) -> LabelTree:
    try:
        n = int(data["n_categories"])
        raw = data["nodes"]
        nodes = [
            TreeNode(
                int(d["id"]),
                int(d["level"]),
                frozenset(int(x) for x in d["labels"]),
                None if d["parent"] is None else int(d["parent"]),
                tuple(int(c) for c in d["children"]),
                str(d.get("name", "")),
            )
            for d in raw
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed tree record: {exc}", source=source) from None
    ids = [nd.node_id for nd in nodes]
    if ids != list(range(len(nodes))):
        raise FormatError("node ids must be 0..len-1 in order", source=source)
    for nd in nodes:
        refs = ([nd.parent] if nd.parent is not None else []) + list(nd.children)
        for r in refs:
            if not 0 <= r < len(nodes):
                raise FormatError(f"node {nd.node_id} references missing node {r}", source=source)
    return LabelTree(n, tuple(nodes))


def write_tree(tree: LabelTree, destination) -> None:
    Path(destination).write_text(json.dumps(tree_to_dict(tree), indent=1) + "\n", encoding="utf-8")


def read_tree(source) -> LabelTree:
    path = Path(source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, line=exc.lineno, source=path) from None
    return tree_from_dict(data, source=path)
