"""Gradient-boosted fraud detector, rule baseline and evaluation suite."""

from .baseline import RuleThresholds, baseline_scorer, rule_baseline
from .dataset import FEATURE_NAMES, Dataset, DegenerateDataset
from .gbdt import ArityMismatch, TrainParams, Tree, TreeEnsemble, train
from .metrics import (
    FoldMetrics,
    MetricsReport,
    best_f1_threshold,
    evaluate,
    pr_auc,
    precision_recall_f1,
    stratified_folds,
)

__all__ = [
    "ArityMismatch",
    "Dataset",
    "DegenerateDataset",
    "FEATURE_NAMES",
    "FoldMetrics",
    "MetricsReport",
    "RuleThresholds",
    "TrainParams",
    "Tree",
    "TreeEnsemble",
    "baseline_scorer",
    "best_f1_threshold",
    "evaluate",
    "pr_auc",
    "precision_recall_f1",
    "rule_baseline",
    "stratified_folds",
    "train",
]
