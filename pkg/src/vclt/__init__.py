"""Visual confusion label trees: confusion graphs, community hierarchies, multi-kernel SVM trees."""

__version__ = "0.1.0"

from .classifier import Prediction, evaluate_report, load_model, macro_accuracy, mean_accuracy, predict, predict_batch, save_model
from .community import Partition, PartitionHierarchy, brute_force_best_partition, louvain_hierarchy, modularity
from .confusion_graph import ConfusionGraph, ScoreLog, ScoreRecord, build_confusion_graph
from .errors import (
    DataCoverageError,
    EvaluationError,
    FormatError,
    InvariantError,
    NumericError,
    ParameterError,
    VCLTError,
)
from .flops import FcLayerSpec, FlopReport, fc_multadds, speedup_report, tree_multadds
from .kernels import KernelCombination, KernelSpec, gram_matrix
from .node_trainer import NodeClassifier, TrainingConfig, TreeModel, train_sibling_group, train_tree
from .quality import CategoryDistances, QualityScore, path_product_score, three_category_scores
from .svm import solve_svm_dual
from .synthetic import BlobSpec, generate_blobs, generate_score_log
from .tree import LabelTree, TreeNode, build_vclt, validate_tree

__all__ = [
    "__version__",
    "Prediction",
    "evaluate_report",
    "load_model",
    "macro_accuracy",
    "mean_accuracy",
    "predict",
    "predict_batch",
    "save_model",
    "Partition",
    "PartitionHierarchy",
    "brute_force_best_partition",
    "louvain_hierarchy",
    "modularity",
    "ConfusionGraph",
    "ScoreLog",
    "ScoreRecord",
    "build_confusion_graph",
    "DataCoverageError",
    "EvaluationError",
    "FormatError",
    "InvariantError",
    "NumericError",
    "ParameterError",
    "VCLTError",
    "FcLayerSpec",
    "FlopReport",
    "fc_multadds",
    "speedup_report",
    "tree_multadds",
    "KernelCombination",
    "KernelSpec",
    "gram_matrix",
    "NodeClassifier",
    "TrainingConfig",
    "TreeModel",
    "train_sibling_group",
    "train_tree",
    "CategoryDistances",
    "QualityScore",
    "path_product_score",
    "three_category_scores",
    "solve_svm_dual",
    "BlobSpec",
    "generate_blobs",
    "generate_score_log",
    "LabelTree",
    "TreeNode",
    "build_vclt",
    "validate_tree",
]
