"""Gradient-boosted binary decision trees, built from scratch for auditability.

Each round fits a regression tree to the negative gradient of the weighted
logistic loss with Newton leaf values (second-order, L2-regularized).
Splits are exact greedy over raw feature values with deterministic
tie-breaking (highest gain, then lowest feature index, then lowest
threshold), so the same data, parameters and seed always produce the same
trees, and the canonical JSON serialization always hashes to the same
model hash.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..ledger.codec import sha256
from .dataset import Dataset

_LAMBDA = 1.0  # L2 regularization on leaf weights
_MIN_GAIN = 1e-12


class ArityMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TrainParams:
    num_trees: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    min_leaf: int = 10
    positive_class_weight: float | None = None  # default: n_negative / n_positive

    def __post_init__(self) -> None:
        if self.num_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("tree count, depth and min_leaf must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.positive_class_weight is not None and self.positive_class_weight <= 0:
            raise ValueError("positive class weight must be positive")


@dataclass
class Tree:
    """Array-encoded binary tree; node 0 is the root, feature -1 marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, leaf_value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(leaf_value))
        return len(self.feature) - 1

    def add_split(self, feature: int, threshold: float) -> int:
        self.feature.append(int(feature))
        self.threshold.append(float(threshold))
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf value for every row; rows go left when x[feature] <= threshold."""
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        value = np.asarray(self.value)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, feature[nd]] <= threshold[nd]
            node[idx] = np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        return value[node]

    def used_features(self) -> set[int]:
        return {f for f in self.feature if f >= 0}

    def to_json(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": [float(t) for t in self.threshold],
            "left": list(self.left),
            "right": list(self.right),
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Tree":
        return cls(
            feature=[int(f) for f in obj["feature"]],
            threshold=[float(t) for t in obj["threshold"]],
            left=[int(v) for v in obj["left"]],
            right=[int(v) for v in obj["right"]],
            value=[float(v) for v in obj["value"]],
        )


@dataclass
class TreeEnsemble:
    trees: list[Tree]
    learning_rate: float
    base_score: float  # prior log-odds
    feature_names: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.feature_names)

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.arity:
            raise ArityMismatch(f"expected {self.arity} features, got {X.shape[1]}")
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * tree.apply(X)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.margin(X))

    def predict_one(self, x: np.ndarray) -> float:
        return float(self.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    def used_features(self) -> set[int]:
        used: set[int] = set()
        for tree in self.trees:
            used |= tree.used_features()
        return used

    def to_json(self) -> dict:
        return {
            "kind": "gbdt-binary-logistic",
            "feature_names": list(self.feature_names),
            "learning_rate": float(self.learning_rate),
            "base_score": float(self.base_score),
            "trees": [t.to_json() for t in self.trees],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @property
    def model_hash(self) -> bytes:
        return sha256(self.serialize().encode("utf-8"))

    @classmethod
    def from_json(cls, obj: dict) -> "TreeEnsemble":
        return cls(
            trees=[Tree.from_json(t) for t in obj["trees"]],
            learning_rate=float(obj["learning_rate"]),
            base_score=float(obj["base_score"]),
            feature_names=tuple(obj["feature_names"]),
        )

    @classmethod
    def deserialize(cls, text: str) -> "TreeEnsemble":
        return cls.from_json(json.loads(text))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def _best_split(x_col: np.ndarray, g: np.ndarray, h: np.ndarray, min_leaf: int) -> tuple[float, float] | None:
    """Best (gain, threshold) for one feature, or None if nothing admissible."""
    order = np.argsort(x_col, kind="stable")
    xs = x_col[order]
    gs = np.cumsum(g[order])
    hs = np.cumsum(h[order])
    n = xs.shape[0]
    total_g, total_h = gs[-1], hs[-1]
    # split after position i (0-based): left has i+1 rows
    boundary = xs[:-1] < xs[1:]
    counts = np.arange(1, n)
    ok = boundary & (counts >= min_leaf) & (n - counts >= min_leaf)
    if not ok.any():
        return None
    gl, hl = gs[:-1][ok], hs[:-1][ok]
    gr, hr = total_g - gl, total_h - hl
    parent = total_g**2 / (total_h + _LAMBDA)
    gains = gl**2 / (hl + _LAMBDA) + gr**2 / (hr + _LAMBDA) - parent
    best = int(np.argmax(gains))  # first max keeps the lowest threshold
    gain = float(gains[best])
    pos = np.flatnonzero(ok)[best]
    threshold = float((xs[pos] + xs[pos + 1]) / 2.0)
    return gain, threshold


def _grow_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, params: TrainParams) -> Tree:
    tree = Tree()

    def build(indices: np.ndarray, depth: int) -> int:
        gi, hi = g[indices], h[indices]
        if depth >= params.max_depth or indices.shape[0] < 2 * params.min_leaf:
            return tree.add_leaf(-gi.sum() / (hi.sum() + _LAMBDA))
        best_gain, best_feature, best_threshold = _MIN_GAIN, -1, 0.0
        for f in range(X.shape[1]):
            found = _best_split(X[indices, f], gi, hi, params.min_leaf)
            if found is not None and found[0] > best_gain:
                best_gain, best_feature, best_threshold = found[0], f, found[1]
        if best_feature < 0:
            return tree.add_leaf(-gi.sum() / (hi.sum() + _LAMBDA))
        node = tree.add_split(best_feature, best_threshold)
        go_left = X[indices, best_feature] <= best_threshold
        tree.left[node] = build(indices[go_left], depth + 1)
        tree.right[node] = build(indices[~go_left], depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    return tree


def train(dataset: Dataset, params: TrainParams = TrainParams(), seed: int = 0) -> TreeEnsemble:
    """Fit the boosted ensemble; deterministic for a fixed (dataset, params, seed).

    The seed feeds nothing stochastic today (splits are exact greedy) but is
    part of the contract so callers can treat training as a pure function.
    """
    dataset.require_both_classes()
    X = np.ascontiguousarray(dataset.features, dtype=np.float64)
    y = dataset.labels.astype(np.float64)

    n_pos = float(y.sum())
    n_neg = float(y.shape[0] - n_pos)
    pos_weight = params.positive_class_weight if params.positive_class_weight is not None else n_neg / n_pos
    w = np.where(y == 1.0, pos_weight, 1.0)

    prior = float(np.clip((w * y).sum() / w.sum(), 1e-9, 1 - 1e-9))
    base_score = float(np.log(prior / (1.0 - prior)))

    margin = np.full(y.shape[0], base_score, dtype=np.float64)
    trees: list[Tree] = []
    for _ in range(params.num_trees):
        p = _sigmoid(margin)
        grad = w * (p - y)
        hess = np.maximum(w * p * (1.0 - p), 1e-12)
        tree = _grow_tree(X, grad, hess, params)
        trees.append(tree)
        margin += params.learning_rate * tree.apply(X)
    return TreeEnsemble(trees=trees, learning_rate=params.learning_rate, base_score=base_score,
                        feature_names=dataset.feature_names)
