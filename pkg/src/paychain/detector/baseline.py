"""Threshold rules mimicking a traditional ERP fraud screen."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import FEATURE_NAMES

_AMOUNT = FEATURE_NAMES.index("amount_zscore")
_RATIO = FEATURE_NAMES.index("amount_to_budget_ratio")
_HOUR = FEATURE_NAMES.index("hour_of_day")
_NEW_VENDOR = FEATURE_NAMES.index("new_vendor_flag")


@dataclass(frozen=True)
class RuleThresholds:
    """A flag trips when any rule fires: big amount, new vendor with a large
    budget share, or an off-hours submission."""

    amount_zscore_limit: float = 3.0
    new_vendor_ratio_limit: float = 0.3
    offhours_start: float = 20.0
    offhours_end: float = 6.0

    @classmethod
    def flag_everything(cls) -> "RuleThresholds":
        return cls(amount_zscore_limit=-math.inf)


def rule_baseline(X: np.ndarray, thresholds: RuleThresholds) -> np.ndarray:
    """Boolean flag per row; pure function of the configured thresholds."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    big_amount = X[:, _AMOUNT] > thresholds.amount_zscore_limit
    risky_vendor = (X[:, _NEW_VENDOR] >= 1.0) & (X[:, _RATIO] > thresholds.new_vendor_ratio_limit)
    off_hours = (X[:, _HOUR] >= thresholds.offhours_start) | (X[:, _HOUR] < thresholds.offhours_end)
    return big_amount | risky_vendor | off_hours


def baseline_scorer(thresholds: RuleThresholds):
    """Adapter so the rule screen plugs into ``evaluate`` like any scorer."""

    def score(X: np.ndarray) -> np.ndarray:
        return rule_baseline(X, thresholds).astype(np.float64)

    return score
