"""paychain command line: workflow verbs, audits, simulations and reports.

Report commands accept ``--out DIR`` and write delimited output (CSV),
JSON, markdown where it reads well, and a rendered PNG figure side by
side.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import consensus as consensus_mod
from . import reporting
from .costmodel import PAPER_PROFILES, cost_table, load_profiles, throughput_model
from .datagen import GeneratorConfig, generate, ingest_csv, write_csv as write_dataset_csv
from .harness import bench as run_bench
from .harness import bootstrap, replay_workload, run_insider_attack, run_sensitivity
from .ledger.snapshot import load_snapshot, verify_snapshot_bytes
from .workflow import Action, Role, WorkflowError, build_decision_trail
from .workspace import DEFAULT_BUDGET_LINES, load_workspace, save_workspace

_WORKSPACE_OPTION = click.option(
    "--workspace", "-w", type=click.Path(path_type=Path), default=Path("paychain-ws"),
    show_default=True, help="Workspace directory holding keys, model and ledger.",
)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main() -> None:
    """Tamper-evident payment approval with explainable fraud scoring."""


# -- workspace lifecycle ----------------------------------------------------


@main.command()
@_WORKSPACE_OPTION
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--validators", "n_validators", type=int, default=4, show_default=True)
@click.option("--score-quorum", type=int, default=1, show_default=True,
              help="Matching signed scores required per assessment (committee mode when > 1).")
@click.option("--inference-keys", type=int, default=None, help="Inference keys to register (default: score quorum).")
def init(workspace: Path, seed: int, n_validators: int, score_quorum: int, inference_keys: int | None) -> None:
    """Create a workspace: keys, validators, trained detector, genesis attestations."""
    if workspace.exists() and any(workspace.iterdir()):
        _fail(f"workspace {workspace} already exists and is not empty")
    env = bootstrap(
        seed,
        n_validators=n_validators,
        score_quorum=score_quorum,
        n_inference_keys=inference_keys,
        extra_actors={"dana": (Role.MANAGER, Role.FINANCE)},
    )
    for line, limit in DEFAULT_BUDGET_LINES.items():
        env.engine.add_budget_line(line, limit)
    save_workspace(env, workspace)
    click.echo(f"workspace ready at {workspace}")
    click.echo(f"  validators: {n_validators} (quorum {env.chain.quorum}), score quorum: {score_quorum}")
    click.echo(f"  model hash: {env.model.model_hash.hex()}")
    click.echo(f"  decision threshold: {env.decision_threshold_bps} bps")
    click.echo(f"  budget lines: {', '.join(DEFAULT_BUDGET_LINES)}")


def _parse_features(text: str | None, draw: str, draw_seed: int) -> np.ndarray:
    from .detector.dataset import FEATURE_NAMES

    if text:
        values = [float(v) for v in text.split(",")]
        if len(values) != len(FEATURE_NAMES):
            _fail(f"expected {len(FEATURE_NAMES)} features, got {len(values)}")
        return np.asarray(values)
    data = generate(GeneratorConfig(n_rows=400, fraud_rate=0.5, seed=draw_seed))
    labels = data.dataset.labels
    wanted = 1 if draw == "fraud" else 0
    rows = data.dataset.features[labels == wanted]
    return rows[0]


@main.command()
@_WORKSPACE_OPTION
@click.option("--requester", default="alice", show_default=True)
@click.option("--vendor", default="V-001", show_default=True)
@click.option("--amount", type=float, required=True, help="Payment amount in USD.")
@click.option("--budget-line", default="OPS-1", show_default=True)
@click.option("--features", default=None, help="Comma-separated feature vector (skips the synthetic draw).")
@click.option("--draw", type=click.Choice(["legit", "fraud"]), default="legit", show_default=True,
              help="Draw a synthetic feature row of this kind when --features is not given.")
@click.option("--draw-seed", type=int, default=None, help="Seed for the synthetic draw (default: payment counter).")
def submit(workspace: Path, requester: str, vendor: str, amount: float,
           budget_line: str, features: str | None, draw: str, draw_seed: int | None) -> None:
    """Submit a payment request; scoring and explanation are recorded atomically."""
    env = load_workspace(workspace)
    x = _parse_features(features, draw, draw_seed if draw_seed is not None else env.payment_counter + 1)
    try:
        view = env.submit_payment(
            requester=requester,
            vendor=vendor,
            amount_cents=int(round(amount * 100)),
            budget_line=budget_line,
            features=x,
        )
    except WorkflowError as exc:
        _fail(str(exc))
    save_workspace(env, workspace)
    click.echo(f"{view.request.payment_id}: state {view.state.name}, "
               f"fraud score {view.assessment.score_bps} bps, gas {view.gas_used}")


def _apply_transition(workspace: Path, actor: str, payment_id: str, action: Action, role: Role | None) -> None:
    env = load_workspace(workspace)
    try:
        state = env.transition(actor, payment_id, action, role=role)
    except WorkflowError as exc:
        _fail(str(exc))
    save_workspace(env, workspace)
    view = env.engine.payments[payment_id]
    click.echo(f"{payment_id}: state {state.name}, total gas {view.gas_used}")


@main.command()
@_WORKSPACE_OPTION
@click.argument("payment_id")
@click.option("--actor", required=True)
@click.option("--role", type=click.Choice(["manager", "finance"]), required=True)
def approve(workspace: Path, payment_id: str, actor: str, role: str) -> None:
    """Cast a manager or finance approval."""
    action = Action.MANAGER_APPROVE if role == "manager" else Action.FINANCE_APPROVE
    _apply_transition(workspace, actor, payment_id, action, Role(role))


@main.command()
@_WORKSPACE_OPTION
@click.argument("payment_id")
@click.option("--actor", required=True)
@click.option("--role", type=click.Choice(["manager", "finance"]), required=True)
def reject(workspace: Path, payment_id: str, actor: str, role: str) -> None:
    """Reject a pending payment."""
    _apply_transition(workspace, actor, payment_id, Action.REJECT, Role(role))


@main.command()
@_WORKSPACE_OPTION
@click.argument("payment_id")
@click.option("--actor", required=True, help="Must be the original requester.")
def cancel(workspace: Path, payment_id: str, actor: str) -> None:
    """Cancel a pending payment (requester only, impossible after finance approval)."""
    _apply_transition(workspace, actor, payment_id, Action.CANCEL, Role.REQUESTER)


@main.command()
@_WORKSPACE_OPTION
@click.argument("payment_id")
def execute(workspace: Path, payment_id: str) -> None:
    """Run the system steps: budget check, then fund release."""
    env = load_workspace(workspace)
    try:
        state = env.transition("system", payment_id, Action.BUDGET_CHECK)
        if state.name != "REJECTED":
            state = env.transition("system", payment_id, Action.EXECUTE)
    except WorkflowError as exc:
        _fail(str(exc))
    save_workspace(env, workspace)
    click.echo(f"{payment_id}: state {state.name}")


@main.command()
@_WORKSPACE_OPTION
@click.argument("payment_id")
@click.option("--format", "fmt", type=click.Choice(["json", "markdown"]), default="markdown", show_default=True)
def trail(workspace: Path, payment_id: str, fmt: str) -> None:
    """Print the proof-carrying decision trail of one payment."""
    env = load_workspace(workspace)
    try:
        result = build_decision_trail(env.chain, payment_id)
    except WorkflowError as exc:
        _fail(str(exc))
    click.echo(json.dumps(result.to_json(), indent=2) if fmt == "json" else result.to_markdown())


# -- audit ---------------------------------------------------------------------


@main.group()
def audit() -> None:
    """Verify ledger snapshots and produce inclusion proofs."""


@audit.command("verify")
@click.argument("snapshot", type=click.Path(exists=True, path_type=Path))
@click.option("--receipts", type=click.Path(exists=True, path_type=Path), default=None,
              help="Auditor head-receipt file for truncation detection.")
def audit_verify(snapshot: Path, receipts: Path | None) -> None:
    """Re-verify every hash link, Merkle root, signature and quorum."""
    report = verify_snapshot_bytes(snapshot.read_bytes())
    payload = report.to_json()
    if receipts is not None:
        from .harness.env import HeadReceipt, HeadReceiptLog

        log = HeadReceiptLog(receipts=[
            HeadReceipt(r["height"], bytes.fromhex(r["block_hash"]))
            for r in json.loads(receipts.read_text(encoding="utf-8"))["receipts"]
        ])
        try:
            chain = load_snapshot(snapshot)
            payload["receipt_discrepancies"] = log.check(chain)
        except Exception as exc:
            payload["receipt_discrepancies"] = [f"snapshot does not decode: {exc}"]
    click.echo(json.dumps(payload, indent=2))
    if not report.ok or payload.get("receipt_discrepancies"):
        sys.exit(1)


@audit.command("prove")
@click.argument("snapshot", type=click.Path(exists=True, path_type=Path))
@click.argument("entry_id", type=int)
def audit_prove(snapshot: Path, entry_id: int) -> None:
    """Emit the Merkle inclusion proof of one ledger entry."""
    chain = load_snapshot(snapshot)
    try:
        proof = chain.prove_inclusion(entry_id)
    except Exception as exc:
        _fail(str(exc))
    block = chain.block_at(proof.block_height)
    click.echo(json.dumps({
        "entry_id": entry_id,
        "proof": proof.to_json(),
        "merkle_root": block.merkle_root.hex(),
        "block_hash": block.block_hash().hex(),
    }, indent=2))


# -- consensus -------------------------------------------------------------------


@main.group("consensus")
def consensus_group() -> None:
    """Quorum-commit simulation sweeps."""


@consensus_group.command("sweep")
@click.option("--n", type=int, default=4, show_default=True)
@click.option("--f", "f_count", type=int, default=1, show_default=True)
@click.option("--seeds", type=int, default=1000, show_default=True)
@click.option("--behavior", type=click.Choice(["equivocate", "withhold", "censor", "mixed"]),
              default="mixed", show_default=True)
@click.option("--commit-quorum", type=int, default=None,
              help="Per-node commit threshold (default: the safe floor(2n/3)+1).")
def consensus_sweep(n: int, f_count: int, seeds: int, behavior: str, commit_quorum: int | None) -> None:
    """Seeded rounds with Byzantine fault injection; reports prefix consistency."""
    from .ledger.signing import KeyedHashScheme

    chosen = None if behavior == "mixed" else consensus_mod.Behavior(behavior)
    result = consensus_mod.sweep(
        n, f_count, seeds, KeyedHashScheme(), behavior=chosen, commit_quorum=commit_quorum
    )
    click.echo(consensus_mod.sweep_summary_json(result))


# -- data ------------------------------------------------------------------------


@main.command()
@click.option("--n", "n_rows", type=int, default=10_000, show_default=True)
@click.option("--fraud-rate", type=float, default=0.047, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def datagen(n_rows: int, fraud_rate: float, seed: int, out: Path) -> None:
    """Generate the synthetic enterprise payment dataset as CSV."""
    data = generate(GeneratorConfig(n_rows=n_rows, fraud_rate=fraud_rate, seed=seed))
    write_dataset_csv(data.dataset, out)
    click.echo(f"{out}: {n_rows} rows, {int(data.dataset.labels.sum())} fraud "
               f"({data.dataset.positive_rate:.4f}), categories {data.category_counts()}")


@main.command()
@click.argument("source", type=click.Path(exists=True, path_type=Path))
@click.option("--schema", type=click.Choice(["enterprise", "kaggle"]), default="enterprise", show_default=True)
def ingest(source: Path, schema: str) -> None:
    """Validate and summarize an external labeled CSV."""
    try:
        result = ingest_csv(source, schema)
    except Exception as exc:
        _fail(str(exc))
    click.echo(json.dumps(result.to_json(), indent=2))


# -- cost ------------------------------------------------------------------------


@main.group()
def cost() -> None:
    """Gas cost and throughput modeling."""


@cost.command("table")
@click.option("--gas", type=int, default=751_000, show_default=True)
@click.option("--profiles", "profiles_path", type=click.Path(exists=True, path_type=Path), default=None,
              help="profiles.json (default: the built-in reference networks).")
@click.option("--format", "fmt", type=click.Choice(["markdown", "json"]), default="markdown", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Directory for cost_table.{csv,json,md,png}.")
def cost_table_cmd(gas: int, profiles_path: Path | None, fmt: str, out: Path | None) -> None:
    """Per-network cost of one payment workflow, plus 1,000-tx monthly totals."""
    profiles = load_profiles(profiles_path) if profiles_path else list(PAPER_PROFILES)
    table = cost_table(profiles, gas=gas)
    click.echo(table.to_markdown() if fmt == "markdown" else json.dumps(table.to_json(), indent=2))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        reporting.write_csv(out / "cost_table.csv", table.csv_rows())
        reporting.write_json(out / "cost_table.json", table.to_json())
        reporting.write_text(out / "cost_table.md", table.to_markdown())
        reporting.cost_figure(table, out / "cost_table.png")
        click.echo(f"report written to {out}/cost_table.{{csv,json,md,png}}")


@cost.command("throughput")
@click.option("--block-interval", type=float, default=3.0, show_default=True)
@click.option("--txs-per-block", type=int, default=10, show_default=True)
def cost_throughput(block_interval: float, txs_per_block: int) -> None:
    """Block-interval throughput model (tx/min and daily capacity)."""
    from .costmodel import NetworkProfile

    profile = NetworkProfile(name="custom", block_interval_s=block_interval, txs_per_block=txs_per_block)
    click.echo(json.dumps(throughput_model(profile).to_json(), indent=2))


# -- experiments ------------------------------------------------------------------


@main.group()
def attack() -> None:
    """Attack scenarios."""


@attack.group("run")
def attack_run() -> None:
    """Execute an attack scenario."""


@attack_run.command("insider")
@click.option("--mode", type=click.Choice(["traditional", "ledger"]), default="ledger", show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Markdown report path; JSON, CSV and a figure land alongside.")
def attack_insider(mode: str, seed: int, out: Path | None) -> None:
    """Five flagged payments to a shell vendor, dual-role approvals, then the audit."""
    result = run_insider_attack(mode, seed)
    lines = [
        f"# Insider attack ({mode} system, seed {seed})",
        "",
        f"- payments: {', '.join(result.payment_ids)} totaling ${result.total_cents / 100:,.2f}",
        f"- recorded scores (bps): {list(result.scores_bps)}",
        f"- candidate rows drawn until five were flagged: {result.candidate_draws}",
        f"- alerts deleted by the attacker: {result.alerts_deleted}",
        "",
        result.attacker_view.to_markdown(),
        result.auditor_view.to_markdown(),
    ]
    text = "\n".join(lines)
    click.echo(text)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        reporting.write_text(out, text)
        base = out.with_suffix("")
        reporting.write_json(base.with_suffix(".json"), result.to_json())
        rows = [["payment_id", "score_bps", "auditor_sees_alert", "proof_verified"]]
        seen = {a.payment_id: a for a in result.auditor_view.alerts}
        for pid, score in zip(result.payment_ids, result.scores_bps):
            alert = seen.get(pid)
            rows.append([pid, str(score), str(alert is not None),
                         "" if alert is None else str(alert.proof_verified)])
        reporting.write_csv(base.with_suffix(".csv"), rows)
        reporting.attack_figure(result, base.with_suffix(".png"))
        click.echo(f"report written to {out} (+ .json/.csv/.png)")


@main.command()
@click.option("--days", type=int, default=30, show_default=True)
@click.option("--rate", "tx_per_day", type=int, default=267, show_default=True)
@click.option("--anomaly-rate", type=float, default=0.047, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Directory for replay.{csv,json,md,png}.")
def replay(days: int, tx_per_day: int, anomaly_rate: float, seed: int, out: Path | None) -> None:
    """Drive the full pipeline over a simulated workload and verify the chain."""
    summary = replay_workload(days, tx_per_day, anomaly_rate, seed)
    click.echo(summary.to_markdown())
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        reporting.write_csv(out / "replay.csv", summary.csv_rows())
        reporting.write_json(out / "replay.json", summary.to_json())
        reporting.write_text(out / "replay.md", summary.to_markdown())
        reporting.replay_figure(summary, out / "replay.png")
        click.echo(f"report written to {out}/replay.{{csv,json,md,png}}")


@main.command()
@click.option("--rates", default="0.001,0.047,0.05", show_default=True,
              help="Comma-separated fraud rates.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n", "n_rows", type=int, default=20_000, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Directory for sensitivity.{csv,json,md,png}.")
def sensitivity(rates: str, seed: int, n_rows: int, out: Path | None) -> None:
    """Regenerate, retrain and evaluate at each fraud rate."""
    rate_list = [float(r) for r in rates.split(",") if r]
    report = run_sensitivity(rate_list, seed, n_rows=n_rows)
    click.echo(report.to_markdown())
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        reporting.write_csv(out / "sensitivity.csv", report.csv_rows())
        reporting.write_json(out / "sensitivity.json", report.to_json())
        reporting.write_text(out / "sensitivity.md", report.to_markdown())
        reporting.sensitivity_figure(report, out / "sensitivity.png")
        click.echo(f"report written to {out}/sensitivity.{{csv,json,md,png}}")


@main.command("bench")
@click.option("--n", "n_instances", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Directory for bench.{csv,json,md,png}.")
def bench_cmd(n_instances: int, seed: int, out: Path | None) -> None:
    """Median scoring/explanation latency beside the reference numbers."""
    env = bootstrap(seed)
    report = run_bench(env, n_instances)
    click.echo(report.to_markdown())
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        reporting.write_csv(out / "bench.csv", report.csv_rows())
        reporting.write_json(out / "bench.json", report.to_json())
        reporting.write_text(out / "bench.md", report.to_markdown())
        reporting.bench_figure(report, out / "bench.png")
        click.echo(f"report written to {out}/bench.{{csv,json,md,png}}")


if __name__ == "__main__":
    main()
