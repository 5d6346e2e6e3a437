"""Test-time multiply-add counts: a dense FC head against a tree descent."""
from vclt import FcLayerSpec, build_confusion_graph, build_vclt, louvain_hierarchy, speedup_report
from vclt.flops import format_table, preset_report, worst_path_classifiers
from vclt.synthetic import cifar10_score_log

# %% The two reference heads: 4096-d features, 100 or 1000 classes.
print(format_table([(name, preset_report(name)) for name in ("cifar100", "imagenet")]))

# %% Counting for a real tree: cost follows the worst root-to-leaf path.
tree = build_vclt(louvain_hierarchy(build_confusion_graph(cifar10_score_log(seed=0), 10, 3)))
n = worst_path_classifiers(tree)
report = speedup_report([FcLayerSpec(512, 512), FcLayerSpec(512, 10)], tree, 512)
print(f"\n10-class tree: {n} classifiers on the worst path")
print(format_table([("10-class", report)]))
