"""Sustained workload replay through the full pipeline.

Each simulated day draws a batch of payments (with anomalies injected at
the configured rate), scores and explains all of them in one vectorized
pass, then drives every payment through creation, approvals and execution
or rejection. Approvers follow a simple policy: reject when the recorded
score reaches the decision threshold. The summary reports terminal-state
counts, metered gas, modeled cost per network profile, the full-chain
verification result and trail completeness for every executed payment.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..costmodel import PAPER_PROFILES, usd_cost
from ..datagen import GeneratorConfig, generate
from ..detector.dataset import FEATURE_NAMES
from ..explain import Explanation, background_digest, build_assessment_record, instance_digest, shapley_paths_batch
from ..workflow import Action, Role, WorkflowProjection, WorkflowState
from .env import SimulationEnv, bootstrap

_AMOUNT_Z = FEATURE_NAMES.index("amount_zscore")
_BUDGET_LINES = tuple(f"BL-{i}" for i in range(8))


@dataclass
class DayCounts:
    day: int
    submitted: int = 0
    executed: int = 0
    rejected: int = 0

    def to_json(self) -> dict:
        return {"day": self.day, "submitted": self.submitted, "executed": self.executed, "rejected": self.rejected}


@dataclass
class ReplaySummary:
    days: int
    tx_per_day: int
    anomaly_rate: float
    seed: int
    submitted: int
    terminal_counts: dict[str, int]
    total_gas: int
    network_costs_usd: dict[str, float]
    chain_ok: bool
    chain_failure: dict | None
    trails_checked: int
    trails_complete: bool
    proof_sample_verified: int
    per_day: list[DayCounts] = field(default_factory=list)
    wall_seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "days": self.days,
            "tx_per_day": self.tx_per_day,
            "anomaly_rate": self.anomaly_rate,
            "seed": self.seed,
            "submitted": self.submitted,
            "terminal_counts": self.terminal_counts,
            "total_gas": self.total_gas,
            "network_costs_usd": self.network_costs_usd,
            "chain_ok": self.chain_ok,
            "chain_failure": self.chain_failure,
            "trails_checked": self.trails_checked,
            "trails_complete": self.trails_complete,
            "proof_sample_verified": self.proof_sample_verified,
            "per_day": [d.to_json() for d in self.per_day],
            "wall_seconds": round(self.wall_seconds, 3),
        }

    def to_markdown(self) -> str:
        lines = [
            "# Workload replay",
            "",
            f"- {self.days} days x {self.tx_per_day}/day = {self.submitted} payments "
            f"(anomaly rate {self.anomaly_rate}, seed {self.seed})",
            f"- terminal states: {self.terminal_counts}",
            f"- total gas: {self.total_gas:,}",
            f"- chain verification: {'clean' if self.chain_ok else 'FAILED: ' + str(self.chain_failure)}",
            f"- executed-payment trails complete: {self.trails_complete} ({self.trails_checked} checked)",
            f"- inclusion proofs verified on sample: {self.proof_sample_verified}",
            "",
            "| network | modeled cost (USD) |",
            "|---|---|",
        ]
        for name, cost in self.network_costs_usd.items():
            lines.append(f"| {name} | {cost:,.2f} |")
        return "\n".join(lines) + "\n"

    def csv_rows(self) -> list[list[str]]:
        out = [["day", "submitted", "executed", "rejected"]]
        for d in self.per_day:
            out.append([str(d.day), str(d.submitted), str(d.executed), str(d.rejected)])
        return out


def _amount_cents(z: float) -> int:
    """Deterministic feature-to-amount mapping, log-normal around $800."""
    return max(1, int(round(math.exp(0.8 * z + math.log(800.0)) * 100)))


def replay_workload(
    days: int,
    tx_per_day: int,
    anomaly_rate: float = 0.047,
    seed: int = 1,
    *,
    env: SimulationEnv | None = None,
    proof_sample: int = 50,
) -> ReplaySummary:
    started = time.monotonic()
    if env is None:
        env = bootstrap(seed)
    for line in _BUDGET_LINES:
        if line not in env.engine.budgets:
            # sized so honest volume clears while leaving rejection reachable
            env.engine.add_budget_line(line, max(tx_per_day, 1) * days * 200_000)

    per_day: list[DayCounts] = []
    threshold_bps = env.decision_threshold_bps
    for day in range(days):
        counts = DayCounts(day=day + 1)
        if tx_per_day > 0:
            n_rows = max(tx_per_day, 2)
            batch = generate(GeneratorConfig(n_rows=n_rows, fraud_rate=_clamped_rate(anomaly_rate, n_rows),
                                             seed=seed * 100_000 + day))
            features = batch.dataset.features[:tx_per_day]
            scores = env.model.predict(features)
            phis, base = shapley_paths_batch(env.model, features, env.background)
            bg_ref = background_digest(env.background)
            for i in range(features.shape[0]):
                x = features[i]
                payment_id = env.next_payment_id()
                explanation = Explanation(
                    phi=phis[i], base_value=base,
                    background_ref=bg_ref, instance_ref=instance_digest(x),
                )
                assessment = build_assessment_record(
                    payment_id=payment_id,
                    model=env.model,
                    explanation=explanation,
                    score=float(scores[i]),
                    signers=[(kp.key_id, kp.secret) for kp in env.inference_keys[: env.engine.registry.score_quorum]],
                    scheme=env.scheme,
                )
                env.submit_payment(
                    requester="alice" if i % 2 == 0 else "bob",
                    vendor=f"V-{i % 23:03d}",
                    amount_cents=_amount_cents(float(x[_AMOUNT_Z])),
                    budget_line=_BUDGET_LINES[i % len(_BUDGET_LINES)],
                    features=x,
                    payment_id=payment_id,
                    assessment=assessment,
                )
                counts.submitted += 1
                if assessment.score_bps >= threshold_bps:
                    env.transition("mia", payment_id, Action.REJECT, role=Role.MANAGER)
                    counts.rejected += 1
                    continue
                env.transition("mia", payment_id, Action.MANAGER_APPROVE)
                env.transition("frank", payment_id, Action.FINANCE_APPROVE)
                state = env.transition("system", payment_id, Action.BUDGET_CHECK)
                if state is WorkflowState.REJECTED:
                    counts.rejected += 1
                    continue
                env.transition("system", payment_id, Action.EXECUTE)
                counts.executed += 1
        per_day.append(counts)
        env.clock.advance(24 * 3600 * 1000)

    verification = env.chain.verify_chain()
    projection = WorkflowProjection.from_chain(env.chain)

    terminal_counts = {state.name: 0 for state in WorkflowState}
    trails_complete = True
    executed_ids = []
    for pid, view in projection.payments.items():
        terminal_counts[view.state.name] += 1
        if view.state is WorkflowState.EXECUTED:
            executed_ids.append(pid)
            # complete trail: creation + both approvals + budget check + execute,
            # with the assessment recorded alongside creation
            if len(view.history) != 5 or view.assessment is None:
                trails_complete = False
    terminal_counts = {k: v for k, v in terminal_counts.items() if v}

    proof_sample_verified = 0
    from ..workflow import build_decision_trail

    for pid in executed_ids[:proof_sample]:
        trail = build_decision_trail(env.chain, pid)
        if len(trail.items) == 6 and all(item.proof_verified for item in trail.items):
            proof_sample_verified += 1
        else:
            trails_complete = False

    total_submitted = sum(d.submitted for d in per_day)
    return ReplaySummary(
        days=days,
        tx_per_day=tx_per_day,
        anomaly_rate=anomaly_rate,
        seed=seed,
        submitted=total_submitted,
        terminal_counts=terminal_counts,
        total_gas=projection.total_gas,
        network_costs_usd={
            p.name: round(usd_cost(projection.total_gas, p.gas_price_gwei, p.token_usd), 4)
            for p in PAPER_PROFILES
            if p.fixed_tx_usd is None and p.gas_price_gwei > 0
        },
        chain_ok=verification.ok,
        chain_failure=None if verification.ok else verification.to_json(),
        trails_checked=len(executed_ids),
        trails_complete=trails_complete,
        proof_sample_verified=proof_sample_verified,
        per_day=per_day,
        wall_seconds=time.monotonic() - started,
    )


def _clamped_rate(rate: float, n_rows: int) -> float:
    """The generator needs both classes; pin the rate so each gets one row."""
    return min(max(rate, 1.0 / n_rows), (n_rows - 1.0) / n_rows)
