"""The insider attack, executed against both logging architectures.

A finance director routes five payments totaling $50,000 to a vendor they
control. The detector flags every one (probability above 0.85); the same
person approves all five under both roles inside ten minutes; the payments
execute. In the traditional system the attacker then deletes the alerts
from the mutable log store and the audit six months later sees only
approvals. Against the ledger the alerts are quorum-committed, so the
audit recovers every score and explanation with verified inclusion proofs,
and any byte the attacker flips in the snapshot flips the verification
status instead of the evidence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..datagen import GeneratorConfig, generate
from ..ledger.chain import EntryKind, LedgerChain, verify_inclusion
from ..ledger.snapshot import MutationSpec, decode_snapshot, encode_snapshot, tamper, verify_snapshot_bytes
from ..records import AssessmentRecord, TransitionRecord
from ..workflow import Action, Role
from .env import HeadReceiptLog, SimulationEnv, bootstrap

ATTACK_TOTAL_CENTS = 5_000_000  # five payments, $50,000
ATTACK_AMOUNTS_CENTS = (950_000, 1_050_000, 900_000, 1_100_000, 1_000_000)
ALERT_SCORE_BPS = 8_500  # fraud probability threshold 0.85
APPROVAL_WINDOW_MS = 10 * 60 * 1000


class ScenarioUnsatisfiable(RuntimeError):
    """The detector would not flag the constructed payments; generator or model regressed."""


@dataclass
class LogRow:
    """One row of the traditional, admin-editable log database."""

    row_id: int
    kind: str
    payment_id: str
    author: str
    timestamp_ms: int
    detail: dict


class MutableLogStore:
    """The traditional system's log: anyone with admin rights can rewrite it."""

    def __init__(self) -> None:
        self.rows: list[LogRow] = []
        self._next = 1

    def append(self, kind: str, payment_id: str, author: str, timestamp_ms: int, detail: dict) -> LogRow:
        row = LogRow(self._next, kind, payment_id, author, timestamp_ms, dict(detail))
        self._next += 1
        self.rows.append(row)
        return row

    def delete_where(self, predicate: Callable[[LogRow], bool]) -> int:
        keep = [r for r in self.rows if not predicate(r)]
        removed = len(self.rows) - len(keep)
        self.rows = keep
        return removed

    def edit(self, row_id: int, **detail) -> None:
        for row in self.rows:
            if row.row_id == row_id:
                row.detail.update(detail)
                return
        raise KeyError(f"log row {row_id} not found")

    def snapshot(self) -> "MutableLogStore":
        clone = MutableLogStore()
        clone._next = self._next
        clone.rows = [replace(r, detail=dict(r.detail)) for r in self.rows]
        return clone


@dataclass(frozen=True)
class AlertFact:
    payment_id: str
    entry_id: int | None
    score_bps: int
    top_features: tuple
    proof_verified: bool | None  # None when no proof exists to check

    def to_json(self) -> dict:
        return {
            "payment_id": self.payment_id,
            "entry_id": self.entry_id,
            "score_bps": self.score_bps,
            "top_features": [
                {"feature_id": f.feature_id, "contribution_micro": f.contribution_micro}
                for f in self.top_features
            ],
            "proof_verified": self.proof_verified,
        }


@dataclass(frozen=True)
class ApproverCluster:
    actor: str
    payment_ids: tuple[str, ...]
    first_ms: int
    last_ms: int
    dual_role: bool

    @property
    def window_ms(self) -> int:
        return self.last_ms - self.first_ms

    def to_json(self) -> dict:
        return {
            "actor": self.actor,
            "payment_ids": list(self.payment_ids),
            "window_ms": self.window_ms,
            "dual_role": self.dual_role,
        }


@dataclass
class AuditReport:
    mode: str
    viewpoint: str  # attacker | auditor
    payments_examined: tuple[str, ...]
    alerts: tuple[AlertFact, ...]
    approvals_seen: int
    approver_clusters: tuple[ApproverCluster, ...]
    chain_verification: dict | None  # None for the mutable store (nothing to verify)
    discrepancies: tuple[str, ...] = ()

    @property
    def alert_count(self) -> int:
        return len(self.alerts)

    @property
    def all_proofs_verified(self) -> bool:
        return all(a.proof_verified for a in self.alerts) if self.alerts else False

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "viewpoint": self.viewpoint,
            "payments_examined": list(self.payments_examined),
            "alerts": [a.to_json() for a in self.alerts],
            "approvals_seen": self.approvals_seen,
            "approver_clusters": [c.to_json() for c in self.approver_clusters],
            "chain_verification": self.chain_verification,
            "discrepancies": list(self.discrepancies),
        }

    def to_markdown(self) -> str:
        lines = [
            f"## Audit ({self.mode} system, {self.viewpoint} view)",
            "",
            f"- payments examined: {len(self.payments_examined)}",
            f"- ML alerts found: {self.alert_count}",
            f"- approvals seen: {self.approvals_seen}",
        ]
        for cluster in self.approver_clusters:
            tag = " **dual-role**" if cluster.dual_role else ""
            lines.append(
                f"- approver `{cluster.actor}` approved {len(cluster.payment_ids)} payments "
                f"within {cluster.window_ms / 1000:.0f}s{tag}"
            )
        if self.chain_verification is None:
            lines.append("- evidence integrity: unverifiable (mutable log store)")
        else:
            ok = self.chain_verification.get("ok")
            lines.append(f"- chain verification: {'clean' if ok else 'FAILED'}")
            if not ok:
                lines.append(f"  - {json.dumps(self.chain_verification)}")
        for alert in self.alerts:
            proof = {None: "no proof", True: "proof ok", False: "PROOF FAILED"}[alert.proof_verified]
            lines.append(f"  - {alert.payment_id}: score {alert.score_bps} bps ({proof})")
        for d in self.discrepancies:
            lines.append(f"- discrepancy: {d}")
        return "\n".join(lines) + "\n"


@dataclass
class InsiderAttackResult:
    mode: str
    attacker_view: AuditReport
    auditor_view: AuditReport
    payment_ids: tuple[str, ...]
    scores_bps: tuple[int, ...]
    total_cents: int
    candidate_draws: int
    alerts_deleted: int

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "payment_ids": list(self.payment_ids),
            "scores_bps": list(self.scores_bps),
            "total_cents": self.total_cents,
            "candidate_draws": self.candidate_draws,
            "alerts_deleted": self.alerts_deleted,
            "attacker_view": self.attacker_view.to_json(),
            "auditor_view": self.auditor_view.to_json(),
        }


def _flagged_candidates(env: SimulationEnv, seed: int, needed: int, max_batches: int = 10) -> tuple[np.ndarray, int]:
    """Vendor-fraud feature rows the trained model flags above 0.85, plus draw count."""
    rows: list[np.ndarray] = []
    draws = 0
    for batch in range(max_batches):
        generated = generate(GeneratorConfig(n_rows=400, fraud_rate=0.5, seed=seed * 1000 + 17 + batch))
        mask = (generated.dataset.labels == 1) & (generated.categories == 0)
        candidates = generated.dataset.features[mask]
        draws += int(candidates.shape[0])
        scores = env.model.predict(candidates)
        for row in candidates[scores > ALERT_SCORE_BPS / 10_000.0]:
            rows.append(row)
            if len(rows) == needed:
                return np.asarray(rows), draws
    raise ScenarioUnsatisfiable(
        f"only {len(rows)} of {needed} constructed payments were flagged after {draws} draws"
    )


def _mirror_chain_to_store(chain: LedgerChain, store: MutableLogStore) -> None:
    for entry in chain.entries():
        if entry.kind is EntryKind.ASSESSMENT_RECORDED:
            record = AssessmentRecord.decode(entry.payload)
            store.append("ml_alert", record.payment_id, entry.author, entry.timestamp_ms, record.to_json())
        elif entry.kind is EntryKind.STATE_TRANSITION:
            record = TransitionRecord.decode(entry.payload)
            store.append("transition", record.payment_id, entry.author, entry.timestamp_ms, record.to_json())


def _approver_clusters(transitions: Sequence[tuple[str, str, int, int]]) -> tuple[ApproverCluster, ...]:
    """(actor, payment, action, ts) approval tuples -> same-actor clusters."""
    by_actor: dict[str, list[tuple[str, int, int]]] = {}
    for actor, payment_id, action, ts in transitions:
        by_actor.setdefault(actor, []).append((payment_id, action, ts))
    clusters = []
    for actor in sorted(by_actor):
        items = by_actor[actor]
        payments = tuple(sorted({p for p, _, _ in items}))
        actions = {a for _, a, _ in items}
        stamps = [ts for _, _, ts in items]
        dual = int(Action.MANAGER_APPROVE) in actions and int(Action.FINANCE_APPROVE) in actions
        clusters.append(ApproverCluster(actor, payments, min(stamps), max(stamps), dual))
    return tuple(clusters)


def audit_mutable_store(store: MutableLogStore, payment_ids: Sequence[str], *, mode: str, viewpoint: str) -> AuditReport:
    """What an auditor can recover from the admin-editable log database."""
    wanted = set(payment_ids)
    alerts = []
    approvals = []
    for row in store.rows:
        if row.payment_id not in wanted:
            continue
        if row.kind == "ml_alert":
            detail = row.detail
            alerts.append(AlertFact(
                payment_id=row.payment_id,
                entry_id=None,
                score_bps=int(detail["score_bps"]),
                top_features=tuple(),
                proof_verified=None,
            ))
        elif row.kind == "transition" and row.detail["action"] in (
            int(Action.MANAGER_APPROVE), int(Action.FINANCE_APPROVE),
        ):
            approvals.append((row.detail["actor"], row.payment_id, row.detail["action"], row.timestamp_ms))
    return AuditReport(
        mode=mode,
        viewpoint=viewpoint,
        payments_examined=tuple(sorted(wanted)),
        alerts=tuple(alerts),
        approvals_seen=len(approvals),
        approver_clusters=_approver_clusters(approvals),
        chain_verification=None,
    )


def audit_ledger_snapshot(
    snapshot_bytes: bytes,
    payment_ids: Sequence[str],
    receipts: HeadReceiptLog | None,
    *,
    mode: str = "ledger",
    viewpoint: str = "auditor",
) -> AuditReport:
    """Proof-carrying audit over a (possibly attacker-supplied) snapshot."""
    wanted = set(payment_ids)
    verification = verify_snapshot_bytes(snapshot_bytes)
    discrepancies: list[str] = []
    alerts: list[AlertFact] = []
    approvals: list[tuple[str, str, int, int]] = []

    chain: LedgerChain | None = None
    try:
        chain = decode_snapshot(snapshot_bytes)
    except Exception as exc:  # decode failure is already a verification failure
        discrepancies.append(f"snapshot does not decode: {exc}")

    if chain is not None:
        if receipts is not None:
            discrepancies.extend(receipts.check(chain))
        for entry in chain.entries():
            if entry.kind is EntryKind.ASSESSMENT_RECORDED:
                record = AssessmentRecord.decode(entry.payload)
                if record.payment_id not in wanted:
                    continue
                proof = chain.prove_inclusion(entry.entry_id)
                root = chain.block_at(proof.block_height).merkle_root
                alerts.append(AlertFact(
                    payment_id=record.payment_id,
                    entry_id=entry.entry_id,
                    score_bps=record.score_bps,
                    top_features=record.top_features,
                    proof_verified=verify_inclusion(root, proof, entry),
                ))
            elif entry.kind is EntryKind.STATE_TRANSITION:
                record = TransitionRecord.decode(entry.payload)
                if record.payment_id in wanted and record.action in (
                    int(Action.MANAGER_APPROVE), int(Action.FINANCE_APPROVE),
                ):
                    approvals.append((record.actor, record.payment_id, record.action, record.timestamp_ms))
    if not verification.ok:
        discrepancies.append(
            f"chain verification failed at height {verification.failure_height}: "
            f"{verification.failure.value if verification.failure else 'unknown'}"
        )
    return AuditReport(
        mode=mode,
        viewpoint=viewpoint,
        payments_examined=tuple(sorted(wanted)),
        alerts=tuple(alerts),
        approvals_seen=len(approvals),
        approver_clusters=_approver_clusters(approvals),
        chain_verification=verification.to_json(),
        discrepancies=tuple(discrepancies),
    )


def run_insider_attack(
    mode: str,
    seed: int,
    *,
    env: SimulationEnv | None = None,
    tamper_spec: MutationSpec | None = None,
) -> InsiderAttackResult:
    """Execute the scenario and return (attacker view, auditor view) audits.

    ``tamper_spec`` optionally lets the ledger-mode attacker mutate snapshot
    bytes before the audit; the audit then reports the verification failure.
    """
    if mode not in ("traditional", "ledger"):
        raise ValueError(f"mode must be 'traditional' or 'ledger', got {mode!r}")
    if env is None:
        env = bootstrap(seed, extra_actors={"dana": (Role.MANAGER, Role.FINANCE)})
    elif "dana" not in env.keystore:
        raise ValueError("environment must provision the dual-role actor 'dana'")

    env.engine.add_budget_line("OPS-SHELL", ATTACK_TOTAL_CENTS * 2)
    store = MutableLogStore()

    candidates, draws = _flagged_candidates(env, seed, needed=len(ATTACK_AMOUNTS_CENTS))

    payment_ids = []
    scores = []
    for amount, features in zip(ATTACK_AMOUNTS_CENTS, candidates):
        view = env.submit_payment(
            requester="dana",
            vendor="V-SHELL-7",
            amount_cents=amount,
            budget_line="OPS-SHELL",
            features=features,
        )
        payment_ids.append(view.request.payment_id)
        scores.append(view.assessment.score_bps)

    # the dual-role approver sweeps through all five inside ten minutes
    env.clock.step_ms = 30_000
    for pid in payment_ids:
        env.transition("dana", pid, Action.MANAGER_APPROVE, role=Role.MANAGER)
    for pid in payment_ids:
        env.transition("dana", pid, Action.FINANCE_APPROVE, role=Role.FINANCE)
    env.clock.step_ms = 1_000
    for pid in payment_ids:
        env.transition("system", pid, Action.BUDGET_CHECK)
        env.transition("system", pid, Action.EXECUTE)

    _mirror_chain_to_store(env.chain, store)
    attacker_store = store.snapshot()

    # attacker view: the evidence as it stood before any cover-up
    pre_snapshot = encode_snapshot(env.chain)
    if mode == "traditional":
        attacker_view = audit_mutable_store(attacker_store, payment_ids, mode=mode, viewpoint="attacker")
    else:
        attacker_view = audit_ledger_snapshot(pre_snapshot, payment_ids, env.receipts, mode=mode, viewpoint="attacker")

    # the cover-up
    deleted = 0
    audit_bytes = pre_snapshot
    if mode == "traditional":
        deleted = store.delete_where(lambda r: r.kind == "ml_alert" and r.payment_id in set(payment_ids))
    elif tamper_spec is not None:
        audit_bytes = tamper(pre_snapshot, tamper_spec)

    # auditors arrive six simulated months later
    env.clock.advance(6 * 30 * 24 * 3600 * 1000)
    if mode == "traditional":
        auditor_view = audit_mutable_store(store, payment_ids, mode=mode, viewpoint="auditor")
    else:
        auditor_view = audit_ledger_snapshot(audit_bytes, payment_ids, env.receipts, mode=mode, viewpoint="auditor")

    return InsiderAttackResult(
        mode=mode,
        attacker_view=attacker_view,
        auditor_view=auditor_view,
        payment_ids=tuple(payment_ids),
        scores_bps=tuple(scores),
        total_cents=sum(ATTACK_AMOUNTS_CENTS),
        candidate_draws=draws,
        alerts_deleted=deleted,
    )
