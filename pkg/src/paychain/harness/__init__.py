"""Attack scenarios, audits, workload replay, sensitivity sweeps, benchmarks."""

from .attack import (
    ALERT_SCORE_BPS,
    AuditReport,
    InsiderAttackResult,
    MutableLogStore,
    ScenarioUnsatisfiable,
    audit_ledger_snapshot,
    audit_mutable_store,
    run_insider_attack,
)
from .bench import BenchReport, bench
from .env import HeadReceiptLog, SimClock, SimulationEnv, bootstrap
from .replay import ReplaySummary, replay_workload
from .sensitivity import SensitivityReport, run_sensitivity

__all__ = [
    "ALERT_SCORE_BPS",
    "AuditReport",
    "BenchReport",
    "HeadReceiptLog",
    "InsiderAttackResult",
    "MutableLogStore",
    "ReplaySummary",
    "ScenarioUnsatisfiable",
    "SensitivityReport",
    "SimClock",
    "SimulationEnv",
    "audit_ledger_snapshot",
    "audit_mutable_store",
    "bench",
    "bootstrap",
    "replay_workload",
    "run_insider_attack",
    "run_sensitivity",
]
