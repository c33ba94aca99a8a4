"""Report writers: delimited output, markdown, and matplotlib figures.

Every CLI report command writes its table as CSV (and JSON/markdown where
useful) with a rendered PNG figure alongside, so a report directory is
self-contained for humans and machines alike.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .costmodel import CostTable
from .harness.attack import ALERT_SCORE_BPS, InsiderAttackResult
from .harness.bench import PREDICT_REFERENCE_MS, SHAP_REFERENCE_MS, BenchReport
from .harness.replay import ReplaySummary
from .harness.sensitivity import SensitivityReport


def write_csv(path: str | Path, rows: Sequence[Sequence[str]]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def cost_figure(table: CostTable, path: str | Path) -> Path:
    rows = [(r.network, float(r.typical_usd if r.typical_usd is not None else r.peak_usd)) for r in table.rows]
    rows = [(name, max(cost, 1e-4)) for name, cost in rows]  # log scale floor
    names = [name for name, _ in rows]
    costs = [cost for _, cost in rows]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.barh(names[::-1], costs[::-1], color="#4878a8")
    ax.set_xscale("log")
    ax.set_xlabel(f"USD per {table.gas:,}-gas workflow (log scale)")
    ax.set_title("Per-transaction cost by network")
    ax.grid(axis="x", alpha=0.3)
    return _save(fig, path)


def sensitivity_figure(report: SensitivityReport, path: str | Path) -> Path:
    rows = sorted(report.rows, key=lambda r: r.fraud_rate)
    rates = [r.fraud_rate for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(rates, [r.precision for r in rows], "o-", label="precision")
    ax.plot(rates, [r.recall for r in rows], "s-", label="recall")
    ax.plot(rates, [r.f1 for r in rows], "^--", label="F1", alpha=0.7)
    ax.set_xscale("log")
    ax.set_xlabel("fraud rate")
    ax.set_ylabel("metric")
    ax.set_ylim(0, 1.05)
    ax.set_title("Detection vs fraud prevalence (5-fold CV)")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def replay_figure(summary: ReplaySummary, path: str | Path) -> Path:
    days = [d.day for d in summary.per_day]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.bar(days, [d.executed for d in summary.per_day], label="executed", color="#5a9e6f")
    ax1.bar(days, [d.rejected for d in summary.per_day],
            bottom=[d.executed for d in summary.per_day], label="rejected", color="#c44e52")
    ax1.set_xlabel("simulated day")
    ax1.set_ylabel("payments")
    ax1.set_title("Terminal states per day")
    ax1.legend()
    counts = summary.terminal_counts
    ax2.bar(list(counts), list(counts.values()), color="#4878a8")
    ax2.set_title(f"Totals over {summary.days} days")
    ax2.set_ylabel("payments")
    fig.suptitle(f"Workload replay: {summary.submitted} payments, chain {'clean' if summary.chain_ok else 'FAILED'}")
    return _save(fig, path)


def bench_figure(report: BenchReport, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    labels = ["predict", "explain"]
    measured = [report.predict_median_ms, report.shapley_median_ms]
    reference = [PREDICT_REFERENCE_MS, SHAP_REFERENCE_MS]
    x = range(len(labels))
    ax.bar([i - 0.2 for i in x], measured, width=0.4, label="measured median")
    ax.bar([i + 0.2 for i in x], reference, width=0.4, label="reference")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_ylabel("latency (ms)")
    ax.set_title(f"Per-payment latency over {report.n_instances} calls")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    return _save(fig, path)


def attack_figure(result: InsiderAttackResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(result.payment_ids, result.scores_bps, color="#c44e52")
    ax.axhline(ALERT_SCORE_BPS, color="black", linestyle="--", label=f"alert line ({ALERT_SCORE_BPS} bps)")
    ax.set_ylabel("recorded fraud score (bps)")
    ax.set_ylim(0, 10500)
    ax.set_title(f"Insider attack scores ({result.mode} mode)")
    ax.tick_params(axis="x", rotation=30)
    ax.legend()
    return _save(fig, path)
