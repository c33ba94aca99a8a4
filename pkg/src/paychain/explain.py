"""Exact interventional Shapley attributions for the tree ensemble.

The value of a feature coalition S is the mean model margin over the
background rows with the features in S taken from the explained instance
and the rest from each background row. Two exact routes compute the same
attributions:

- ``shapley_enumeration``: the defining computation, a weighted sum over
  all 2^d coalitions (d <= 16).
- ``shapley_paths``: per-leaf closed form. For one tree and one background
  row, a leaf is reached exactly when every feature that only the instance
  satisfies is present in S and every feature that only the background row
  satisfies is absent, so each leaf contributes through a closed-form count
  over the remaining free features. This is the production route; tests
  pin it to the enumeration route.

Attributions are on the margin (log-odds) scale. ``encode_fixed_point``
turns an explanation into the integer on-chain form (basis points and
micro-units, rounded half away from zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detector.gbdt import Tree, TreeEnsemble
from .ledger.codec import Writer, sha256
from .records import AssessmentRecord, TopFeature

_MAX_EXACT_FEATURES = 16
_MICRO = 1_000_000
_I32 = 2**31


class TooManyFeatures(ValueError):
    pass


class EmptyBackground(ValueError):
    pass


class Overflow(OverflowError):
    pass


@dataclass(frozen=True)
class Explanation:
    """Per-feature margin contributions; base_value + sum(phi) equals the margin."""

    phi: np.ndarray
    base_value: float
    background_ref: bytes
    instance_ref: bytes

    def margin(self) -> float:
        return float(self.base_value + self.phi.sum())


def instance_digest(x: np.ndarray) -> bytes:
    w = Writer()
    w.raw(b"paychain/instance/v1")
    w.u32(x.shape[0])
    for v in np.asarray(x, dtype=np.float64):
        w.str_(repr(float(v)))
    return sha256(w.getvalue())


def background_digest(background: np.ndarray) -> bytes:
    w = Writer()
    w.raw(b"paychain/background/v1")
    w.u32(background.shape[0])
    w.u32(background.shape[1])
    for row in np.asarray(background, dtype=np.float64):
        for v in row:
            w.str_(repr(float(v)))
    return sha256(w.getvalue())


def _check_inputs(model: TreeEnsemble, x: np.ndarray, background: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    d = model.arity
    if x.shape[0] != d or background.shape[1] != d:
        raise ValueError(f"instance/background arity does not match the model's {d} features")
    if background.shape[0] == 0:
        raise EmptyBackground("background sample set must be non-empty")
    return x, background


# -- route 1: subset enumeration ------------------------------------------------


def shapley_enumeration(model: TreeEnsemble, x: np.ndarray, background: np.ndarray) -> Explanation:
    """Defining computation: phi_i as the weighted sum over all coalitions."""
    x, background = _check_inputs(model, x, background)
    d = model.arity
    if d > _MAX_EXACT_FEATURES:
        raise TooManyFeatures(f"exact enumeration is bounded at {_MAX_EXACT_FEATURES} features, got {d}")
    n_masks = 1 << d
    b = background.shape[0]

    # v(S) for every coalition: mean margin over hybrids of x and background
    masks = np.arange(n_masks, dtype=np.uint32)
    take_x = (masks[:, None] >> np.arange(d)[None, :]) & 1  # (n_masks, d)
    hybrids = np.where(take_x[:, None, :].astype(bool), x[None, None, :], background[None, :, :])
    v = model.margin(hybrids.reshape(n_masks * b, d)).reshape(n_masks, b).mean(axis=1)

    fact = [math.factorial(k) for k in range(d + 1)]
    weight = np.array([fact[s] * fact[d - s - 1] / fact[d] for s in range(d)])
    sizes = np.array([bin(m).count("1") for m in range(n_masks)])

    phi = np.zeros(d)
    for i in range(d):
        bit = 1 << i
        without = np.flatnonzero((masks & bit) == 0)
        with_i = without | bit
        phi[i] = float(np.sum(weight[sizes[without]] * (v[with_i] - v[without])))

    return Explanation(
        phi=phi,
        base_value=float(v[0]),
        background_ref=background_digest(background),
        instance_ref=instance_digest(x),
    )


# -- route 2: per-leaf closed form ----------------------------------------------


def _leaf_conditions(tree: Tree) -> list[tuple[float, dict[int, tuple[float, float]]]]:
    """(leaf value, {feature: (low, high]}) for every leaf, intervals merged per feature."""
    out: list[tuple[float, dict[int, tuple[float, float]]]] = []

    def walk(node: int, bounds: dict[int, tuple[float, float]]) -> None:
        if tree.feature[node] < 0:
            out.append((tree.value[node], dict(bounds)))
            return
        f, t = tree.feature[node], tree.threshold[node]
        low, high = bounds.get(f, (-math.inf, math.inf))
        new_high = min(high, t)  # left branch: x[f] <= t
        if low < new_high:
            left_bounds = dict(bounds)
            left_bounds[f] = (low, new_high)
            walk(tree.left[node], left_bounds)
        new_low = max(low, t)  # right branch: x[f] > t
        if new_low < high:
            right_bounds = dict(bounds)
            right_bounds[f] = (new_low, high)
            walk(tree.right[node], right_bounds)

    walk(0, {})
    return out


def _coalition_weights(d: int) -> tuple[np.ndarray, np.ndarray]:
    """W_plus[p, q] and W_minus[p, q] for leaves needing p present / q absent features.

    A leaf's indicator game over the d features has Shapley value
    W_plus(p, q) for each required-present feature and -W_minus(p, q) for
    each required-absent one; free features are dummies that only enter the
    subset-size weights.
    """
    fact = [math.factorial(k) for k in range(d + 1)]

    def w(s: int) -> float:
        return fact[s] * fact[d - s - 1] / fact[d]

    size = d + 1
    plus = np.zeros((size, size))
    minus = np.zeros((size, size))
    for p in range(size):
        for q in range(size - p):
            m = d - p - q
            if p > 0:
                plus[p, q] = sum(math.comb(m, j) * w(p - 1 + j) for j in range(m + 1))
            if q > 0:
                minus[p, q] = sum(math.comb(m, j) * w(p + j) for j in range(m + 1))
    return plus, minus


def shapley_paths_batch(model: TreeEnsemble, X: np.ndarray, background: np.ndarray) -> tuple[np.ndarray, float]:
    """phi matrix (n_instances, d) plus the shared base value, closed form."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    d = model.arity
    if X.shape[1] != d or background.shape[1] != d:
        raise ValueError(f"instance/background arity does not match the model's {d} features")
    if background.shape[0] == 0:
        raise EmptyBackground("background sample set must be non-empty")

    n, b = X.shape[0], background.shape[0]
    plus, minus = _coalition_weights(d)
    phi = np.zeros((n, d))
    lr = model.learning_rate

    for tree in model.trees:
        for leaf_value, bounds in _leaf_conditions(tree):
            if not bounds:
                continue  # condition-free leaf contributes only to the base value
            feats = sorted(bounds)
            ax = np.empty((n, len(feats)), dtype=bool)
            ab = np.empty((b, len(feats)), dtype=bool)
            for j, f in enumerate(feats):
                low, high = bounds[f]
                ax[:, j] = (X[:, f] > low) & (X[:, f] <= high)
                ab[:, j] = (background[:, f] > low) & (background[:, f] <= high)
            # per (instance, background row): feature required present / absent
            need = ax[:, None, :] & ~ab[None, :, :]  # (n, b, k)
            block = ~ax[:, None, :] & ab[None, :, :]
            alive = (ax[:, None, :] | ab[None, :, :]).all(axis=2)  # (n, b)
            p_cnt = need.sum(axis=2)
            q_cnt = block.sum(axis=2)
            w_plus = plus[p_cnt, q_cnt] * alive
            w_minus = minus[p_cnt, q_cnt] * alive
            scale = lr * leaf_value / b
            for j, f in enumerate(feats):
                phi[:, f] += scale * (need[:, :, j] * w_plus).sum(axis=1)
                phi[:, f] -= scale * (block[:, :, j] * w_minus).sum(axis=1)

    base_value = float(model.margin(background).mean())
    return phi, base_value


def shapley_paths(model: TreeEnsemble, x: np.ndarray, background: np.ndarray) -> Explanation:
    x, background = _check_inputs(model, x, background)
    phi, base = shapley_paths_batch(model, x.reshape(1, -1), background)
    return Explanation(
        phi=phi[0],
        base_value=base,
        background_ref=background_digest(background),
        instance_ref=instance_digest(x),
    )


def shapley_exact(
    model: TreeEnsemble,
    x: np.ndarray,
    background: np.ndarray,
    method: str = "paths",
) -> Explanation:
    """Exact interventional Shapley attribution of one instance.

    Both methods compute the same values; "enumeration" is the defining sum
    over coalitions and bounds d at 16, "paths" is the leaf-wise closed
    form that scales to batch scoring.
    """
    if method == "paths":
        return shapley_paths(model, x, background)
    if method == "enumeration":
        return shapley_enumeration(model, x, background)
    raise ValueError(f"unknown method {method!r}")


# -- top-k selection and on-chain fixed point -----------------------------------


def top_k(explanation: Explanation, k: int = 5) -> list[tuple[int, float]]:
    """(feature_id, contribution) ordered by descending |contribution|, ties by id."""
    phi = explanation.phi
    if k > phi.shape[0]:
        raise ValueError(f"k={k} exceeds {phi.shape[0]} features")
    order = sorted(range(phi.shape[0]), key=lambda i: (-abs(float(phi[i])), i))
    return [(i, float(phi[i])) for i in order[:k]]


def round_half_away(value: float) -> int:
    return int(math.floor(abs(value) + 0.5)) * (1 if value >= 0 else -1)


@dataclass(frozen=True)
class FixedPointAssessment:
    score_bps: int
    top_features: tuple[TopFeature, ...]
    base_value_micro: int


def encode_fixed_point(explanation: Explanation, score: float, k: int = 5) -> FixedPointAssessment:
    """Integer on-chain form: score in basis points, attributions in micro-units."""
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} outside [0, 1]")
    features = []
    for feature_id, contribution in top_k(explanation, k):
        micro = round_half_away(contribution * _MICRO)
        if abs(micro) >= _I32:
            raise Overflow(f"contribution {contribution} exceeds the 32-bit micro-unit range")
        features.append(TopFeature(feature_id=feature_id, contribution_micro=micro))
    base_micro = round_half_away(explanation.base_value * _MICRO)
    if abs(base_micro) >= _I32:
        raise Overflow(f"base value {explanation.base_value} exceeds the 32-bit micro-unit range")
    return FixedPointAssessment(
        score_bps=round_half_away(score * 10_000),
        top_features=tuple(features),
        base_value_micro=base_micro,
    )


def decode_fixed_point(assessment: FixedPointAssessment) -> tuple[float, dict[int, float], float]:
    """(score, {feature: contribution}, base value) back on the real scale."""
    return (
        assessment.score_bps / 10_000.0,
        {f.feature_id: f.contribution_micro / _MICRO for f in assessment.top_features},
        assessment.base_value_micro / _MICRO,
    )


def draw_background(features: np.ndarray, size: int = 100, seed: int = 7) -> np.ndarray:
    """Fixed background sample drawn once from training data and then pinned."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[0] < size:
        return features.copy()
    rng = np.random.default_rng(seed)
    idx = rng.choice(features.shape[0], size=size, replace=False)
    return features[np.sort(idx)]


def build_assessment_record(
    *,
    payment_id: str,
    model: TreeEnsemble,
    explanation: Explanation,
    score: float,
    signers: list[tuple[str, bytes]],
    scheme,
) -> AssessmentRecord:
    """Assemble and sign the on-chain assessment payload."""
    fixed = encode_fixed_point(explanation, score)
    unsigned = AssessmentRecord(
        payment_id=payment_id,
        model_hash=model.model_hash,
        score_bps=fixed.score_bps,
        top_features=fixed.top_features,
        base_value_micro=fixed.base_value_micro,
        background_ref=explanation.background_ref,
        signatures=(),
    )
    message = unsigned.signing_bytes()
    signatures = tuple((key_id, scheme.sign(secret, message)) for key_id, secret in signers)
    return AssessmentRecord(
        payment_id=unsigned.payment_id,
        model_hash=unsigned.model_hash,
        score_bps=unsigned.score_bps,
        top_features=unsigned.top_features,
        base_value_micro=unsigned.base_value_micro,
        background_ref=unsigned.background_ref,
        signatures=signatures,
    )
