"""Precision/recall metrics, PR-AUC, stratified cross-validation.

PR-AUC integrates the precision-recall curve trapezoidally over distinct
score thresholds, anchored at (recall 0, precision 1). The threshold used
for point metrics is the one maximizing F1 on the validation fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .dataset import Dataset, DegenerateDataset
from .gbdt import TrainParams, TreeEnsemble, train


def precision_recall_f1(labels: np.ndarray, predicted: np.ndarray) -> tuple[float, float, float]:
    labels = np.asarray(labels).astype(bool)
    predicted = np.asarray(predicted).astype(bool)
    tp = int((labels & predicted).sum())
    fp = int((~labels & predicted).sum())
    fn = int((labels & ~predicted).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _curve_points(labels: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(recall, precision) at every distinct threshold, highest threshold first."""
    labels = np.asarray(labels).astype(np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = labels.sum()
    if n_pos == 0 or n_pos == labels.shape[0]:
        raise DegenerateDataset("PR curve needs both classes present")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(labels[order])
    pred = np.arange(1, labels.shape[0] + 1, dtype=np.float64)
    # keep only the last index of each tied score group
    last_of_group = np.append(sorted_scores[:-1] != sorted_scores[1:], True)
    tp_g = tp[last_of_group]
    pred_g = pred[last_of_group]
    recalls = tp_g / n_pos
    precisions = tp_g / pred_g
    return recalls, precisions


def pr_auc(labels: np.ndarray, scores: np.ndarray) -> float:
    recalls, precisions = _curve_points(labels, scores)
    r = np.concatenate(([0.0], recalls))
    p = np.concatenate(([1.0], precisions))
    return float(np.sum((r[1:] - r[:-1]) * (p[1:] + p[:-1]) / 2.0))


def best_f1_threshold(labels: np.ndarray, scores: np.ndarray) -> tuple[float, float]:
    """Threshold (predict positive at score >= t) maximizing F1, and that F1."""
    labels = np.asarray(labels).astype(np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = labels.sum()
    if n_pos == 0:
        raise DegenerateDataset("cannot choose a threshold without positives")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(labels[order])
    pred = np.arange(1, labels.shape[0] + 1, dtype=np.float64)
    last_of_group = np.append(sorted_scores[:-1] != sorted_scores[1:], True)
    tp_g = tp[last_of_group]
    pred_g = pred[last_of_group]
    thresholds = sorted_scores[last_of_group]
    precision = tp_g / pred_g
    recall = tp_g / n_pos
    denom = precision + recall
    f1 = np.where(denom > 0, 2 * precision * recall / np.where(denom > 0, denom, 1.0), 0.0)
    best = int(np.argmax(f1))  # first max keeps the highest threshold
    return float(thresholds[best]), float(f1[best])


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """k index arrays preserving the class ratio within one sample per fold."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (1, 0):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for i, row in enumerate(idx):
            folds[i % k].append(int(row))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    precision: float
    recall: float
    f1: float
    pr_auc: float
    threshold: float
    n_val: int
    n_pos: int

    def to_json(self) -> dict:
        return {
            "fold": self.fold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "pr_auc": self.pr_auc,
            "threshold": self.threshold,
            "n_val": self.n_val,
            "n_pos": self.n_pos,
        }


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    pr_auc: float
    threshold: float
    per_fold: tuple[FoldMetrics, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "pr_auc": self.pr_auc,
            "threshold": self.threshold,
            "per_fold": [f.to_json() for f in self.per_fold],
        }


Scorer = Callable[[np.ndarray], np.ndarray]
Subject = Union[TrainParams, TreeEnsemble, Scorer]


def evaluate(subject: Subject, dataset: Dataset, folds: int = 5, seed: int = 0) -> MetricsReport:
    """Stratified k-fold evaluation.

    A ``TrainParams`` subject is retrained on the k-1 training folds each
    round (honest cross-validation); a fitted ensemble or plain scorer is
    only scored on each validation fold. The decision threshold maximizes
    F1 on the validation fold.
    """
    dataset.require_both_classes()
    fold_indices = stratified_folds(dataset.labels, folds, seed)
    all_rows = np.arange(dataset.n_rows)
    results: list[FoldMetrics] = []
    for i, val_idx in enumerate(fold_indices):
        val = dataset.subset(val_idx)
        if isinstance(subject, TrainParams):
            train_idx = np.setdiff1d(all_rows, val_idx, assume_unique=True)
            model = train(dataset.subset(train_idx), subject, seed=seed * 1000 + i)
            scores = model.predict(val.features)
        elif isinstance(subject, TreeEnsemble):
            scores = subject.predict(val.features)
        else:
            scores = np.asarray(subject(val.features), dtype=np.float64)
        threshold, _ = best_f1_threshold(val.labels, scores)
        precision, recall, f1 = precision_recall_f1(val.labels, scores >= threshold)
        auc = pr_auc(val.labels, scores)
        results.append(FoldMetrics(i, precision, recall, f1, auc, threshold, val.n_rows, int(val.labels.sum())))
    return MetricsReport(
        precision=float(np.mean([r.precision for r in results])),
        recall=float(np.mean([r.recall for r in results])),
        f1=float(np.mean([r.f1 for r in results])),
        pr_auc=float(np.mean([r.pr_auc for r in results])),
        threshold=float(np.mean([r.threshold for r in results])),
        per_fold=tuple(results),
    )
