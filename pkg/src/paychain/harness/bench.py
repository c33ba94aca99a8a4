"""Latency benchmark: single-payment scoring and explanation medians."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from ..costmodel import PAPER_PROFILES, throughput_model
from ..explain import shapley_paths
from .env import SimulationEnv

# Reference timings the report prints for side-by-side comparison.
PREDICT_REFERENCE_MS = 1.2
SHAP_REFERENCE_MS = 18.5
END_TO_END_REFERENCE_PER_MIN = 200.0
PREDICT_GATE_MS = 10.0


@dataclass(frozen=True)
class BenchReport:
    n_instances: int
    predict_median_ms: float
    shapley_median_ms: float
    end_to_end_per_min: float
    predict_samples_ms: tuple[float, ...]
    shapley_samples_ms: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "predict_median_ms": self.predict_median_ms,
            "shapley_median_ms": self.shapley_median_ms,
            "end_to_end_per_min": self.end_to_end_per_min,
            "reference": {
                "predict_ms": PREDICT_REFERENCE_MS,
                "shapley_ms": SHAP_REFERENCE_MS,
                "end_to_end_per_min": END_TO_END_REFERENCE_PER_MIN,
            },
            "predict_gate_ms": PREDICT_GATE_MS,
            "predict_gate_met": self.predict_median_ms < PREDICT_GATE_MS,
        }

    def to_markdown(self) -> str:
        return "\n".join([
            "# Latency benchmark",
            "",
            "| metric | measured | reference |",
            "|---|---|---|",
            f"| prediction (median) | {self.predict_median_ms:.2f} ms | {PREDICT_REFERENCE_MS} ms |",
            f"| Shapley explanation (median) | {self.shapley_median_ms:.2f} ms | {SHAP_REFERENCE_MS} ms |",
            f"| end-to-end throughput | {self.end_to_end_per_min:.0f}/min | {END_TO_END_REFERENCE_PER_MIN:.0f}/min |",
            "",
            f"- prediction gate (< {PREDICT_GATE_MS} ms): "
            f"{'met' if self.predict_median_ms < PREDICT_GATE_MS else 'MISSED'}",
            "",
        ])

    def csv_rows(self) -> list[list[str]]:
        return [
            ["metric", "measured", "reference"],
            ["predict_median_ms", repr(self.predict_median_ms), repr(PREDICT_REFERENCE_MS)],
            ["shapley_median_ms", repr(self.shapley_median_ms), repr(SHAP_REFERENCE_MS)],
            ["end_to_end_per_min", repr(self.end_to_end_per_min), repr(END_TO_END_REFERENCE_PER_MIN)],
        ]


def bench(env: SimulationEnv, n_instances: int = 1000, *, shapley_instances: int | None = None) -> BenchReport:
    """Median wall-clock latencies over ``n_instances`` single-payment calls."""
    if n_instances < 100:
        raise ValueError("benchmark needs at least 100 instances")
    rng = np.random.default_rng(env.seed)
    pool = env.background
    rows = pool[rng.integers(0, pool.shape[0], n_instances)]

    predict_ms = []
    for i in range(n_instances):
        t0 = time.perf_counter()
        env.model.predict_one(rows[i])
        predict_ms.append((time.perf_counter() - t0) * 1000.0)

    n_shap = shapley_instances if shapley_instances is not None else min(n_instances, 200)
    shapley_ms = []
    for i in range(n_shap):
        t0 = time.perf_counter()
        shapley_paths(env.model, rows[i % n_instances], env.background)
        shapley_ms.append((time.perf_counter() - t0) * 1000.0)

    polygon = next(p for p in PAPER_PROFILES if p.name.startswith("Polygon (30"))
    return BenchReport(
        n_instances=n_instances,
        predict_median_ms=float(statistics.median(predict_ms)),
        shapley_median_ms=float(statistics.median(shapley_ms)),
        end_to_end_per_min=throughput_model(polygon).tx_per_min,
        predict_samples_ms=tuple(predict_ms),
        shapley_samples_ms=tuple(shapley_ms),
    )
