"""Detector: training, prediction, metrics with brute-force oracles, baseline."""

from __future__ import annotations

import numpy as np
import pytest

from paychain.datagen import GeneratorConfig, generate
from paychain.detector import (
    ArityMismatch,
    Dataset,
    DegenerateDataset,
    FEATURE_NAMES,
    RuleThresholds,
    TrainParams,
    Tree,
    TreeEnsemble,
    baseline_scorer,
    best_f1_threshold,
    evaluate,
    pr_auc,
    precision_recall_f1,
    rule_baseline,
    stratified_folds,
    train,
)


def _toy_separable(n: int = 20) -> Dataset:
    """Linearly separable on feature 0, balanced so min_leaf=10 still splits."""
    rng = np.random.default_rng(1)
    features = rng.normal(0, 0.3, size=(n, len(FEATURE_NAMES)))
    labels = np.array([0, 1] * (n // 2), dtype=np.int64)
    features[:, 0] = np.where(labels == 1, 2.0, -2.0) + rng.normal(0, 0.1, n)
    return Dataset(features, labels)


def test_separable_toy_set_reaches_training_accuracy_one():
    data = _toy_separable()
    model = train(data, TrainParams(num_trees=10, max_depth=2), seed=0)
    predictions = (model.predict(data.features) >= 0.5).astype(int)
    assert (predictions == data.labels).all()


def test_training_is_deterministic_with_identical_hash():
    data = _toy_separable(40)
    a = train(data, TrainParams(num_trees=5), seed=3)
    b = train(data, TrainParams(num_trees=5), seed=3)
    assert a.model_hash == b.model_hash
    assert a.serialize() == b.serialize()
    c = train(data, TrainParams(num_trees=6), seed=3)
    assert a.model_hash != c.model_hash


def test_model_hash_changes_with_any_parameter():
    data = _toy_separable(40)
    base = train(data, TrainParams(num_trees=4), seed=0)
    tweaked = TreeEnsemble(base.trees, base.learning_rate * 2, base.base_score, base.feature_names)
    assert tweaked.model_hash != base.model_hash


def test_serialization_roundtrip_preserves_predictions():
    data = _toy_separable(40)
    model = train(data, TrainParams(num_trees=8), seed=0)
    restored = TreeEnsemble.deserialize(model.serialize())
    assert restored.model_hash == model.model_hash
    assert np.array_equal(restored.predict(data.features), model.predict(data.features))


def test_empty_ensemble_predicts_one_half():
    model = TreeEnsemble(trees=[], learning_rate=0.1, base_score=0.0, feature_names=FEATURE_NAMES)
    assert model.predict_one(np.zeros(len(FEATURE_NAMES))) == 0.5


def test_single_stump_is_monotone_across_threshold():
    tree = Tree()
    root = tree.add_split(0, 0.0)
    tree.left[root] = tree.add_leaf(-1.0)
    tree.right[root] = tree.add_leaf(1.0)
    model = TreeEnsemble(trees=[tree], learning_rate=1.0, base_score=0.0, feature_names=FEATURE_NAMES)
    lo = np.zeros(len(FEATURE_NAMES)); lo[0] = -1.0
    hi = np.zeros(len(FEATURE_NAMES)); hi[0] = +1.0
    assert model.predict_one(hi) > model.predict_one(lo)


def test_arity_mismatch_raises():
    model = TreeEnsemble(trees=[], learning_rate=0.1, base_score=0.0, feature_names=FEATURE_NAMES)
    with pytest.raises(ArityMismatch):
        model.predict(np.zeros((3, 4)))


def test_degenerate_dataset_rejected():
    features = np.zeros((10, len(FEATURE_NAMES)))
    with pytest.raises(DegenerateDataset):
        train(Dataset(features, np.zeros(10, dtype=np.int64)), TrainParams())
    with pytest.raises(DegenerateDataset):
        evaluate(TrainParams(), Dataset(features, np.ones(10, dtype=np.int64)))


# -- metrics with independent oracles -------------------------------------------------


def _brute_force_prf(labels, predicted):
    tp = sum(1 for y, p in zip(labels, predicted) if y == 1 and p)
    fp = sum(1 for y, p in zip(labels, predicted) if y == 0 and p)
    fn = sum(1 for y, p in zip(labels, predicted) if y == 1 and not p)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _brute_force_pr_auc(labels, scores) -> float:
    """O(n^2) recount at every distinct threshold, trapezoid over the same curve."""
    labels = np.asarray(labels)
    points = [(0.0, 1.0)]
    for threshold in sorted(set(scores), reverse=True):
        predicted = np.asarray(scores) >= threshold
        tp = int((labels & predicted).sum())
        fp = int((~labels.astype(bool) & predicted).sum())
        points.append((tp / labels.sum(), tp / (tp + fp)))
    area = 0.0
    for (r0, p0), (r1, p1) in zip(points, points[1:]):
        area += (r1 - r0) * (p1 + p0) / 2.0
    return area


def test_precision_recall_f1_against_brute_force(rng):
    for _ in range(20):
        labels = rng.integers(0, 2, 50)
        predicted = rng.integers(0, 2, 50).astype(bool)
        assert precision_recall_f1(labels, predicted) == pytest.approx(_brute_force_prf(labels, predicted))


def test_pr_auc_matches_exhaustive_oracle(rng):
    for trial in range(10):
        n = int(rng.integers(50, 1000))
        labels = (rng.random(n) < 0.2).astype(np.int64)
        if labels.sum() in (0, n):
            continue
        scores = np.round(rng.random(n), 2)  # force score ties
        assert pr_auc(labels, scores) == pytest.approx(_brute_force_pr_auc(labels, scores), abs=1e-9)


def test_perfect_scorer_metrics_are_one():
    labels = np.array([0, 1, 0, 1, 1, 0, 0, 0])
    scores = labels.astype(float)
    assert pr_auc(labels, scores) == pytest.approx(1.0)
    threshold, f1 = best_f1_threshold(labels, scores)
    p, r, f = precision_recall_f1(labels, scores >= threshold)
    assert (p, r, f) == (1.0, 1.0, 1.0)


def test_random_scorer_pr_auc_near_positive_rate():
    rng = np.random.default_rng(42)
    p = 0.1
    aucs = []
    for _ in range(50):
        labels = (rng.random(1500) < p).astype(np.int64)
        if labels.sum() == 0:
            continue
        aucs.append(pr_auc(labels, rng.random(1500)))
    assert abs(float(np.mean(aucs)) - p) < 0.02


def test_label_inverted_scorer_is_dominated_by_random():
    """An anti-ranking recalls no more than random at any matched flag budget,
    and its best achievable F1 cannot beat random's (flag-everything is the
    only operating point it has left)."""
    rng = np.random.default_rng(3)
    labels = (rng.random(2000) < 0.1).astype(np.int64)
    true_scores = labels + rng.normal(0, 0.2, 2000)
    inverted = -true_scores
    random_scores = rng.random(2000)
    n_pos = labels.sum()
    for budget in (50, 200, 500, 1000):
        top_inv = np.argsort(-inverted, kind="stable")[:budget]
        top_rnd = np.argsort(-random_scores, kind="stable")[:budget]
        recall_inverted = labels[top_inv].sum() / n_pos
        recall_random = labels[top_rnd].sum() / n_pos
        assert recall_inverted <= recall_random + 1e-9
    _, f1_inverted = best_f1_threshold(labels, inverted)
    _, f1_random = best_f1_threshold(labels, random_scores)
    assert f1_inverted <= f1_random + 1e-9


def test_stratified_folds_preserve_class_ratio():
    labels = np.array([1] * 47 + [0] * 953)
    rng = np.random.default_rng(0)
    rng.shuffle(labels)
    folds = stratified_folds(labels, 5, seed=1)
    assert sorted(np.concatenate(folds).tolist()) == list(range(1000))
    positives = [int(labels[f].sum()) for f in folds]
    assert max(positives) - min(positives) <= 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 2


def test_evaluate_requires_two_folds():
    data = _toy_separable(20)
    with pytest.raises(ValueError):
        evaluate(TrainParams(), data, folds=1)


# -- rule baseline ------------------------------------------------------------------


def test_flag_everything_reproduces_the_analytic_identity(frozen_data):
    dataset = frozen_data.dataset
    report = evaluate(baseline_scorer(RuleThresholds.flag_everything()), dataset, folds=5, seed=0)
    p = dataset.positive_rate
    assert report.recall == pytest.approx(1.0)
    assert report.precision == pytest.approx(p, abs=1e-3)
    assert report.f1 == pytest.approx(2 * p / (1 + p), abs=2e-3)
    # the reference operating point: 0.047 / 1.000 / 0.089 (2p/(1+p) = 0.0898,
    # which the published row truncates to 0.089)
    assert round(report.precision, 3) == 0.047
    assert abs(report.f1 - 0.089) < 1e-3


def test_no_rules_tripped_means_zero_recall(frozen_data):
    never = RuleThresholds(amount_zscore_limit=np.inf, new_vendor_ratio_limit=np.inf,
                           offhours_start=25.0, offhours_end=-1.0)
    flags = rule_baseline(frozen_data.dataset.features, never)
    assert not flags.any()


def test_amount_rule_at_p99_has_partial_recall(frozen_data):
    dataset = frozen_data.dataset
    amount_index = FEATURE_NAMES.index("amount_zscore")
    p99 = float(np.quantile(dataset.features[:, amount_index], 0.99))
    only_amount = RuleThresholds(amount_zscore_limit=p99, new_vendor_ratio_limit=np.inf,
                                 offhours_start=25.0, offhours_end=-1.0)
    flags = rule_baseline(dataset.features, only_amount)
    recall = float(flags[dataset.labels == 1].mean())
    assert 0.0 < recall < 1.0


# -- properties on the frozen synthetic set -------------------------------------------


def test_increasing_class_weight_never_decreases_recall(frozen_data):
    """3-point weight sweep, recall at the fixed 0.5 threshold on a holdout."""
    dataset = frozen_data.dataset
    folds = stratified_folds(dataset.labels, 4, seed=0)
    holdout = folds[0]
    train_idx = np.setdiff1d(np.arange(dataset.n_rows), holdout)
    train_set, val_set = dataset.subset(train_idx), dataset.subset(holdout)
    base_weight = float((train_set.labels == 0).sum() / (train_set.labels == 1).sum())
    recalls = []
    for factor in (0.5, 1.0, 2.0):
        params = TrainParams(num_trees=40, positive_class_weight=base_weight * factor)
        model = train(train_set, params, seed=0)
        predicted = model.predict(val_set.features) >= 0.5
        _, recall, _ = precision_recall_f1(val_set.labels, predicted)
        recalls.append(recall)
    assert recalls[0] <= recalls[1] + 1e-9
    assert recalls[1] <= recalls[2] + 1e-9


def test_fraud_rate_direction_property(sensitivity_report):
    rows = {round(r.fraud_rate, 4): r for r in sensitivity_report.rows}
    assert rows[0.001].precision < rows[0.005].precision < rows[0.05].precision
    for row in sensitivity_report.rows:
        assert row.recall >= 0.90


def test_evaluate_accepts_fitted_model(frozen_data, default_model):
    report = evaluate(default_model, frozen_data.dataset, folds=3, seed=1)
    assert report.f1 > 0.9  # scored on folds of its own training data
