"""Enterprise payment feature schema and the labeled dataset container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEATURE_NAMES: tuple[str, ...] = (
    "amount_zscore",
    "budget_utilization",
    "vendor_age_days",
    "vendor_tx_count",
    "hour_of_day",
    "weekend_flag",
    "approval_gap_minutes",
    "requester_tx_rate",
    "amount_to_budget_ratio",
    "vendor_country_risk",
    "round_amount_flag",
    "new_vendor_flag",
)


class DegenerateDataset(ValueError):
    """Dataset holds a single class; nothing can be trained or scored fairly."""


@dataclass(frozen=True)
class Dataset:
    """Fixed-arity numeric features with binary fraud labels (1 = fraud)."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label row counts differ")
        if self.features.shape[1] != len(self.feature_names):
            raise ValueError(
                f"arity {self.features.shape[1]} does not match {len(self.feature_names)} feature names"
            )
        if np.isnan(self.features).any():
            raise ValueError("features contain missing values")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def arity(self) -> int:
        return int(self.features.shape[1])

    @property
    def positive_rate(self) -> float:
        return float(self.labels.mean()) if self.n_rows else 0.0

    def require_both_classes(self) -> None:
        if self.n_rows == 0 or self.labels.min() == self.labels.max():
            raise DegenerateDataset("dataset must contain both classes")

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.feature_names)
