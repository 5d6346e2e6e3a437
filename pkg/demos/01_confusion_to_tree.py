"""From classifier confusion to a label tree, on a named 10-class score log."""
import numpy as np

from vclt import build_confusion_graph, build_vclt, louvain_hierarchy, validate_tree
from vclt.synthetic import CIFAR10_NAMES, cifar10_score_log

# %% A score log: one row of class scores per sample, with confusion planted
# between pairs such as cat/dog and between two coarse groups.
log = cifar10_score_log(samples_per_class=100, seed=0)
print(f"{len(log)} samples, {log.n_categories} categories")
print("first row:", np.round(log.scores[0], 3))

# %% Each sample donates its top-3 non-true score shares to {true, pred} edges.
graph = build_confusion_graph(log, 10, tau=3, category_names=CIFAR10_NAMES)
a, b = graph.strongest_edge()
print(f"strongest edge: {graph.category_names[a]} -- {graph.category_names[b]} ({graph.weight(a, b):.2f})")

# %% Louvain keeps merging until modularity stops improving.
hierarchy = louvain_hierarchy(graph)
for i, level in enumerate(hierarchy, start=1):
    groups = [[CIFAR10_NAMES[c] for c in comm] for comm in level.communities]
    print(f"level {i}: Q={level.modularity:.3f} {groups}")

# %% Communities become internal nodes; leaves keep ids 0..9.
tree = build_vclt(hierarchy, CIFAR10_NAMES)
assert validate_tree(tree) == []
print("nodes per layer:", [len(layer) for layer in tree.layers])
for node in tree.internal_nodes():
    print(f"node {node.node_id:2d} layer {node.level}: children {list(node.children)}")
