"""Train a multi-kernel SVM at every sibling group and classify by descending the tree."""
from vclt import BlobSpec, build_confusion_graph, build_vclt, evaluate_report, generate_blobs, louvain_hierarchy, train_tree
from vclt.classifier import macro_accuracy, predict_batch
from vclt.synthetic import generate_score_log, nearest_centroid_predict, supercluster_pairs

# %% 16 Gaussian classes arranged in 4 super-clusters.
data = generate_blobs(BlobSpec(seed=0))
print("train", data.X_train.shape, "test", data.X_test.shape)

# %% A confusion log that mixes classes inside each super-cluster gives the tree.
log = generate_score_log(data.X_train, data.y_train, 0.05, supercluster_pairs(data.supercluster_of, 0.2), 16, seed=0)
tree = build_vclt(louvain_hierarchy(build_confusion_graph(log, 16, 3)))
print("nodes per layer:", [len(layer) for layer in tree.layers])

# %% Training: kernel weights on the simplex, then a refinement pass that
# discourages a child from outscoring its parent.
model = train_tree(tree, data.X_train, data.y_train)
for node_id, diag in sorted(model.diagnostics.items()):
    if diag["passthrough"]:
        continue
    weights = ", ".join(f"{w:.2f}" for w in diag["weight_history"][-1])
    if diag["violations_before"] is None:
        print(f"group under node {node_id} (root, no parent constraint): weights [{weights}]")
    else:
        print(f"group under node {node_id}: weights [{weights}] "
              f"violations {diag['violations_before']} -> {diag['violations_after']}")

# %% Descend from the root, taking the best-scoring child each step.
preds = predict_batch(model, data.X_test)
print("sample 0 path:", preds[0].path, "label", preds[0].label, "truth", data.y_test[0])
report = evaluate_report(model, data.X_test, data.y_test, preds)
baseline = macro_accuracy(data.y_test, nearest_centroid_predict(data.X_train, data.y_train, data.X_test), 16)
print(f"tree MA {report['mean_accuracy']:.2f}  nearest-centroid MA {baseline:.2f}")
print("routing accuracy per layer:", {k: round(v, 2) for k, v in report["routing_accuracy"].items()})
