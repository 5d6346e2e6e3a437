"""Scoring candidate trees with the path-product quality proxy."""
from vclt import CategoryDistances, build_vclt, path_product_score, three_category_scores
from vclt.community import Partition, PartitionHierarchy

# %% Three categories where A and B are close and C is far from both.
d_ab, d_ac, d_bc = 0.5, 2.0, 3.0
dist = CategoryDistances.three(d_ab, d_ac, d_bc)
print("closed forms:", three_category_scores(d_ab, d_ac, d_bc))


def shape(labels):
    levels = (Partition.from_labels(labels, 0.0),)
    if len(set(labels)) > 1:
        levels += (Partition.from_labels([0, 0, 0], 0.0),)
    return build_vclt(PartitionHierarchy(levels))


# %% Grouping the close pair first scores highest.
for name, labels in {"((A,B),C)": [0, 0, 1], "((A,C),B)": [0, 1, 0], "((B,C),A)": [0, 1, 1], "flat": [0, 0, 0]}.items():
    print(f"{name:10s} {path_product_score(shape(labels), dist).total:.3f}")

# %% Average linkage is available but does not reduce to the closed forms.
print("average linkage ((A,B),C):", path_product_score(shape([0, 0, 1]), dist, linkage="average").total)
