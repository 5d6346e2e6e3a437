"""Command-line pipeline: synthetic data, graph, hierarchy, tree, training, inference, accounting."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import evaluate_report, load_model, predict_batch, save_model
from .community import louvain_hierarchy, read_hierarchy, write_hierarchy
from .confusion_graph import build_confusion_graph, read_graph, read_score_log, write_graph, write_score_log
from .errors import FormatError, InvariantError, ParameterError, VCLTError
from .flops import PRESETS, FcLayerSpec, format_table, speedup_report
from .kernels import format_kernel, parse_kernel
from .node_trainer import TrainingConfig, train_tree
from .quality import LINKAGES, path_product_score, read_distances
from .synthetic import (
    CIFAR10_NAMES,
    BlobSpec,
    cifar10_score_log,
    generate_blobs,
    generate_score_log,
    read_features,
    supercluster_pairs,
    write_features,
)
from .tree import build_vclt, read_tree, validate_tree, write_tree

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("vclt")

GLOBAL_KEYS = ("seed", "threads", "verbose")


class UsageError(ParameterError):
    pass


class Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with argparse's code 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# Each option: (flag, dest, type, default, help). default=None means optional.
OPTIONS: dict[str, list[tuple]] = {
    "synth": [
        ("--kind", "kind", str, "blobs", "dataset family: blobs or cifar10"),
        ("--out-dir", "out_dir", str, ".", "directory for the generated files"),
        ("--n-classes", "n_classes", int, 16, "number of classes (blobs)"),
        ("--n-superclusters", "n_superclusters", int, 4, "number of superclusters (blobs)"),
        ("--samples-per-class", "samples_per_class", int, 125, "samples per class before the split"),
        ("--dim", "dim", int, 8, "feature dimension (blobs)"),
        ("--intra-spread", "intra_spread", float, 1.0, "sample spread around class centres"),
        ("--inter-spread", "inter_spread", float, 10.0, "spread of supercluster centres"),
        ("--class-spread", "class_spread", float, 3.0, "spread of class centres around their supercluster"),
        ("--noise", "noise", float, 0.05, "score noise level"),
        ("--strength", "strength", float, 0.2, "planted confusion strength (blobs)"),
    ],
    "build-graph": [
        ("--scores", "scores", str, None, "score-log CSV"),
        ("--tau", "tau", int, 3, "top categories kept per record"),
        ("--n-categories", "n_categories", int, None, "category count (default: from the log)"),
        ("--names", "names", str, None, "file with one category name per line"),
        ("--out", "out", str, None, "output graph file"),
    ],
    "detect": [
        ("--graph", "graph", str, None, "confusion graph file"),
        ("--out", "out", str, None, "output hierarchy file"),
    ],
    "build-tree": [
        ("--hierarchy", "hierarchy", str, None, "hierarchy file"),
        ("--graph", "graph", str, None, "graph file supplying category names"),
        ("--out", "out", str, None, "output tree file"),
    ],
    "train": [
        ("--tree", "tree", str, None, "tree file"),
        ("--features", "features", str, None, "training feature CSV"),
        ("--out", "out", str, None, "output model file (support vectors go to <out>.sv)"),
        ("--kernels", "kernels", str, None, "kernel bank, comma separated (linear, poly:D:C, rbf:G|auto)"),
        ("--C", "C", float, 1.0, "SVM penalty"),
        ("--lam", "lam", float, 1.0, "regularization weight in the refinement objective"),
        ("--rho", "rho", float, 0.1, "weight of the parent-score penalty"),
        ("--mkl-iters", "mkl_iters", int, 5, "kernel-weight update rounds"),
        ("--refine-epochs", "refine_epochs", int, 20, "refinement epochs"),
        ("--tol", "tol", float, 1e-6, "SVM KKT tolerance"),
        ("--step", "step", float, 0.01, "refinement base step size"),
        ("--diagnostics", "diagnostics", str, None, "optional JSON file with per-group training diagnostics"),
    ],
    "predict": [
        ("--model", "model", str, None, "model file"),
        ("--features", "features", str, None, "feature CSV"),
        ("--out", "out", str, None, "output predictions CSV"),
    ],
    "evaluate": [
        ("--model", "model", str, None, "model file"),
        ("--features", "features", str, None, "labelled feature CSV"),
        ("--out", "out", str, None, "output JSON report"),
    ],
    "flops": [
        ("--preset", "preset", str, None, f"comma-separated presets ({', '.join(PRESETS)}); default: all"),
        ("--tree", "tree", str, None, "tree file (instead of a preset)"),
        ("--fc", "fc", str, None, "FC stack for --tree, e.g. 4096x4096,4096x100"),
        ("--feature-dim", "feature_dim", int, None, "feature dimension for --tree"),
        ("--out", "out", str, None, "also write the table here"),
    ],
    "compare-trees": [
        ("--distances", "distances", str, None, "square distance-matrix CSV"),
        ("--k", "k", float, 1.0, "proportionality constant"),
        ("--linkage", "linkage", str, "single", f"group linkage: {' or '.join(LINKAGES)}"),
        ("--out", "out", str, None, "also write the ranking here"),
    ],
}

REQUIRED = {
    "build-graph": ("scores", "out"),
    "detect": ("graph", "out"),
    "build-tree": ("hierarchy", "out"),
    "train": ("tree", "features", "out"),
    "predict": ("model", "features", "out"),
    "evaluate": ("model", "features"),
    "compare-trees": ("distances",),
}

HELP = {
    "synth": "generate synthetic features and score logs",
    "build-graph": "build a confusion graph from a score log",
    "detect": "hierarchical community detection on a graph",
    "build-tree": "turn a hierarchy into a label tree",
    "train": "train the multi-kernel SVM scorers of a tree",
    "predict": "route feature vectors through a trained tree",
    "evaluate": "accuracy report for a trained tree",
    "flops": "multiply-add accounting, FC head versus tree",
    "compare-trees": "rank candidate trees by the path-product quality proxy",
}


def _add_globals(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="TOML config file; flags override it")
    p.add_argument("--seed", type=int, default=d, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=d, help="worker threads (default 1)")
    p.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="log progress to stderr")


def build_parser() -> Parser:
    parser = Parser(prog="vclt", description="Visual confusion label trees.")
    parser.add_argument("--version", action="version", version=f"vclt {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=Parser, metavar="COMMAND")
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        _add_globals(p, suppress=True)
        for flag, dest, typ, default, text in opts:
            suffix = "" if default is None else f" (default {default})"
            if dest in REQUIRED.get(name, ()):
                suffix = " (required)"
            p.add_argument(flag, dest=dest, type=typ, default=None, help=text + suffix)
        if name == "compare-trees":
            p.add_argument("trees", nargs="+", help="two or more tree files")
    return parser


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise ParameterError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(str(exc), source=path) from None
    option_keys = {o[1] for opts in OPTIONS.values() for o in opts}
    for key, value in cfg.items():
        if key in OPTIONS:
            if not isinstance(value, dict):
                raise ParameterError(f"config: [{key}] must be a table")
            known = {o[1] for o in OPTIONS[key]}
            unknown = sorted(set(value) - known)
            if unknown:
                raise ParameterError(f"config: unknown keys in [{key}]: {', '.join(unknown)}")
        elif key not in GLOBAL_KEYS and key not in option_keys:
            raise ParameterError(f"config: unknown key {key!r}")
    return cfg


def resolve(args: argparse.Namespace, config: dict) -> argparse.Namespace:
    """Fill unset options from the command's config table, then top-level config keys, then defaults."""
    section = config.get(args.command, {})
    for _, dest, typ, default, _ in OPTIONS[args.command]:
        if getattr(args, dest) is None:
            value = section.get(dest, config.get(dest, default))
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            try:
                setattr(args, dest, typ(value) if value is not None else None)
            except (TypeError, ValueError):
                raise ParameterError(f"config: bad value for {dest}: {value!r}") from None
    for key, default in (("seed", 0), ("threads", 1)):
        if getattr(args, key, None) is None:
            setattr(args, key, int(config.get(key, default)))
    if not getattr(args, "verbose", False):
        args.verbose = bool(config.get("verbose", False))
    for dest in REQUIRED.get(args.command, ()):
        if getattr(args, dest) is None:
            raise ParameterError(f"{args.command}: --{dest.replace('_', '-')} is required")
    if args.threads < 1:
        raise ParameterError("--threads must be >= 1")
    if args.seed < 0 or args.seed >= 2**64:
        raise ParameterError("--seed must be an unsigned 64-bit integer")
    return args


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ParameterError(f"file not found: {path}")
    return p


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "cifar10":
        scores = cifar10_score_log(args.samples_per_class, args.noise, args.seed)
        write_score_log(scores, out / "scores.csv")
        (out / "names.txt").write_text("\n".join(CIFAR10_NAMES) + "\n", encoding="utf-8")
        print(f"wrote {out / 'scores.csv'} and {out / 'names.txt'}")
        return 0
    if args.kind != "blobs":
        raise ParameterError(f"unknown --kind {args.kind!r}; choose blobs or cifar10")
    spec = BlobSpec(
        n_classes=args.n_classes,
        n_superclusters=args.n_superclusters,
        samples_per_class=args.samples_per_class,
        dim=args.dim,
        intra_spread=args.intra_spread,
        inter_spread=args.inter_spread,
        seed=args.seed,
        class_spread=args.class_spread,
    )
    data = generate_blobs(spec)
    write_features(out / "train.csv", data.X_train, data.y_train)
    write_features(out / "test.csv", data.X_test, data.y_test,
                   [str(len(data.y_train) + i) for i in range(len(data.y_test))])
    pairs = supercluster_pairs(data.supercluster_of, args.strength)
    scores = generate_score_log(data.X_train, data.y_train, args.noise, pairs, spec.n_classes, args.seed)
    write_score_log(scores, out / "scores.csv")
    print(f"wrote {out / 'train.csv'}, {out / 'test.csv'} and {out / 'scores.csv'}")
    return 0


def cmd_build_graph(args) -> int:
    scores = read_score_log(_existing(args.scores))
    names = None
    if args.names:
        names = [ln.strip() for ln in _existing(args.names).read_text(encoding="utf-8").splitlines() if ln.strip()]
    n = args.n_categories if args.n_categories is not None else scores.n_categories
    graph = build_confusion_graph(scores, n, args.tau, names)
    write_graph(graph, args.out)
    print(f"{len(graph.edges)} edges, total weight {graph.total_weight:.6g}")
    return 0


def cmd_detect(args) -> int:
    graph = read_graph(_existing(args.graph))
    hierarchy = louvain_hierarchy(graph)
    write_hierarchy(hierarchy, args.out)
    for i, level in enumerate(hierarchy, start=1):
        print(f"level {i}: {len(level)} communities, Q={level.modularity:.6f}")
    return 0


def cmd_build_tree(args) -> int:
    hierarchy = read_hierarchy(_existing(args.hierarchy))
    names = read_graph(_existing(args.graph)).category_names if args.graph else None
    tree = build_vclt(hierarchy, names)
    problems = validate_tree(tree)
    if problems:
        raise InvariantError("; ".join(problems))
    write_tree(tree, args.out)
    print(f"{len(tree)} nodes, depth {tree.depth}, layer sizes {[len(l) for l in tree.layers]}")
    return 0


def cmd_train(args) -> int:
    tree = read_tree(_existing(args.tree))
    _, X, y = read_features(_existing(args.features))
    cfg = TrainingConfig(
        C=args.C, lam=args.lam, rho=args.rho, mkl_iters=args.mkl_iters,
        refine_epochs=args.refine_epochs, tol=args.tol, step=args.step,
    )
    bank = [parse_kernel(k) for k in args.kernels.split(",")] if args.kernels else None
    model = train_tree(tree, X, y, cfg, bank, n_jobs=args.threads)
    sv = save_model(model, args.out)
    if args.diagnostics:
        _write_json(args.diagnostics, {str(k): v for k, v in model.diagnostics.items()})
    print(f"trained {len(model.classifiers)} scorers, {len(model.support_features)} support vectors -> {args.out}, {sv}")
    log.info("kernel bank: %s", ", ".join(format_kernel(s) for s in model.kernel_bank))
    return 0


def cmd_predict(args) -> int:
    model = load_model(_existing(args.model))
    ids, X, _ = read_features(_existing(args.features))
    preds = predict_batch(model, X)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("sample_id,predicted_label,path\n")
        for sid, p in zip(ids, preds):
            fh.write(f"{sid},{p.label},{'/'.join(map(str, p.path))}\n")
    print(f"{len(preds)} predictions -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(_existing(args.model))
    _, X, y = read_features(_existing(args.features))
    report = evaluate_report(model, X, y)
    report["routing_accuracy"] = {str(k): v for k, v in report["routing_accuracy"].items()}
    report["per_class"] = {str(k): v for k, v in report["per_class"].items()}
    if args.out:
        _write_json(args.out, report)
    print(f"mean accuracy {report['mean_accuracy']:.2f}%  pooled {report['pooled_accuracy']:.2f}%")
    for layer, acc in report["routing_accuracy"].items():
        print(f"routing layer {layer}: {acc:.2f}%")
    return 0


def _parse_fc(text: str) -> list[FcLayerSpec]:
    layers = []
    for part in text.split(","):
        bias = part.endswith("+b")
        dims = part[:-2] if bias else part
        try:
            a, b = (int(v) for v in dims.lower().split("x"))
        except ValueError:
            raise ParameterError(f"cannot parse FC layer {part!r}; expected INxOUT[+b]") from None
        layers.append(FcLayerSpec(a, b, bias))
    return layers


def cmd_flops(args) -> int:
    rows = []
    if args.tree:
        if not args.fc or args.feature_dim is None:
            raise ParameterError("flops --tree needs --fc and --feature-dim")
        tree = read_tree(_existing(args.tree))
        rows.append((Path(args.tree).stem, speedup_report(_parse_fc(args.fc), tree, args.feature_dim)))
    if args.preset or not args.tree:
        names = args.preset.split(",") if args.preset else list(PRESETS)
        for name in names:
            if name not in PRESETS:
                raise ParameterError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
            layers, n, d = PRESETS[name]
            rows.append((name, speedup_report(layers, n, d)))
    table = format_table(rows)
    sys.stdout.write(table)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    return 0


def cmd_compare_trees(args) -> int:
    if len(args.trees) < 2:
        raise ParameterError("compare-trees needs at least two tree files")
    dist = read_distances(_existing(args.distances))
    results = []
    for path in args.trees:
        tree = read_tree(_existing(path))
        results.append((path, path_product_score(tree, dist, args.k, args.linkage)))
    best = max(range(len(results)), key=lambda i: (results[i][1].total, -i))
    lines = ["tree,total"] + [f"{p},{q.total!r}" for p, q in results] + [f"best,{results[best][0]}"]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "build-graph": cmd_build_graph,
    "detect": cmd_detect,
    "build-tree": cmd_build_tree,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "flops": cmd_flops,
    "compare-trees": cmd_compare_trees,
}


def _fail(exc: BaseException, code: int, kind: str) -> int:
    message = " ".join(str(exc).split())
    sys.stderr.write(f"vclt: error: kind={kind} code={code} message={message}\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("vclt: a command is required (see --help)")
        config = load_config(args.config) if args.config else {}
        args = resolve(args, config)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="vclt: %(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args)
    except VCLTError as exc:
        return _fail(exc, exc.exit_code, exc.kind)
    except (OSError, ValueError) as exc:
        # unreadable paths and similar environment problems count as usage errors
        return _fail(exc, 1, "usage")
    except np.linalg.LinAlgError as exc:
        return _fail(exc, 4, "numeric")


if __name__ == "__main__":
    sys.exit(main())
