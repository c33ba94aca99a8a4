"""On-disk workspace for the CLI: keys, model, ledger snapshot, receipts.

Workflow state is never stored; it is a pure function of the committed
ledger and gets rebuilt by replaying the snapshot on load. Key material
lives in keys.json because this is a single-machine simulation; a real
deployment would keep secrets in an HSM and pin validator keys out of
band.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .consensus import Behavior, QuorumSigner, Validator, ValidatorSet
from .datagen import GeneratorConfig
from .detector import TreeEnsemble
from .harness.env import HeadReceipt, HeadReceiptLog, SimClock, SimulationEnv
from .ledger.chain import LedgerChain
from .ledger.signing import KeyPair, KeyRegistry, scheme_by_name
from .ledger.snapshot import load_snapshot, save_snapshot
from .workflow import AttestationRegistry, BudgetLine, Role, WorkflowEngine, WorkflowProjection

SNAPSHOT_NAME = "ledger.snap"

DEFAULT_BUDGET_LINES = {f"OPS-{i}": 500_000_00 for i in range(1, 5)}


def save_workspace(env: SimulationEnv, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    keys = {
        "scheme": env.scheme.name,
        "actors": {
            actor: {
                "secret": kp.secret.hex(),
                "public": kp.public.hex(),
                "roles": sorted(r.value for r in env.engine.roles.get(actor, set())),
            }
            for actor, kp in sorted(env.keystore.items())
        },
        "validators": [
            {
                "id": v.validator_id,
                "secret": v.keypair.secret.hex(),
                "public": v.keypair.public.hex(),
                "behavior": v.behavior.value,
            }
            for v in env.validators.members
        ],
        "inference": [
            {"id": kp.key_id, "secret": kp.secret.hex(), "public": kp.public.hex()}
            for kp in env.inference_keys
        ],
    }
    (path / "keys.json").write_text(json.dumps(keys, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (path / "model.json").write_text(env.model.serialize() + "\n", encoding="utf-8")
    (path / "background.json").write_text(
        json.dumps({"rows": env.background.tolist()}) + "\n", encoding="utf-8"
    )
    meta = {
        "seed": env.seed,
        "score_quorum": env.engine.registry.score_quorum,
        "clock_now_ms": env.clock.now_ms,
        "clock_step_ms": env.clock.step_ms,
        "payment_counter": env.payment_counter,
        "decision_threshold_bps": env.decision_threshold_bps,
        "budget_limits": {line: b.limit_cents for line, b in sorted(env.engine.budgets.items())},
        "train_config": {
            "n_rows": env.train_config.n_rows,
            "fraud_rate": env.train_config.fraud_rate,
            "seed": env.train_config.seed,
        },
    }
    (path / "workspace.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (path / "receipts.json").write_text(
        json.dumps({"receipts": [r.to_json() for r in env.receipts.receipts]}, indent=2) + "\n",
        encoding="utf-8",
    )
    save_snapshot(env.chain, path / SNAPSHOT_NAME)
    return path


def load_workspace(path: str | Path) -> SimulationEnv:
    path = Path(path)
    keys = json.loads((path / "keys.json").read_text(encoding="utf-8"))
    meta = json.loads((path / "workspace.json").read_text(encoding="utf-8"))
    scheme = scheme_by_name(keys["scheme"])

    members = tuple(
        Validator(
            validator_id=v["id"],
            keypair=KeyPair(v["id"], bytes.fromhex(v["secret"]), bytes.fromhex(v["public"])),
            behavior=Behavior(v["behavior"]),
        )
        for v in keys["validators"]
    )
    validators = ValidatorSet(members, scheme)

    registry = KeyRegistry(scheme)
    keystore: dict[str, KeyPair] = {}
    roles: dict[str, set[Role]] = {}
    for actor, entry in keys["actors"].items():
        kp = KeyPair(actor, bytes.fromhex(entry["secret"]), bytes.fromhex(entry["public"]))
        keystore[actor] = kp
        registry.register(actor, kp.public)
        roles[actor] = {Role(r) for r in entry["roles"]}

    chain = load_snapshot(path / SNAPSHOT_NAME)
    # the snapshot's registry only holds public keys; rebind the live one
    chain.key_registry = registry
    report = chain.verify_chain()
    if not report.ok:
        raise ValueError(f"workspace ledger fails verification: {report.to_json()}")

    model = TreeEnsemble.deserialize((path / "model.json").read_text(encoding="utf-8"))
    background = np.asarray(json.loads((path / "background.json").read_text(encoding="utf-8"))["rows"])
    inference_keys = [
        KeyPair(e["id"], bytes.fromhex(e["secret"]), bytes.fromhex(e["public"])) for e in keys["inference"]
    ]

    clock = SimClock(start_ms=meta["clock_now_ms"], step_ms=meta["clock_step_ms"])
    attestations = AttestationRegistry(scheme, score_quorum=meta["score_quorum"])
    engine = WorkflowEngine(
        chain=chain,
        registry=attestations,
        keystore=keystore,
        roles=roles,
        committer=QuorumSigner(validators).collect,
        clock=clock,
    )

    # workflow state is replayed from the chain, never trusted from disk
    projection = WorkflowProjection.from_chain(chain)
    engine.payments = projection.payments
    for record in projection.attestations:
        attestations.register(record.model_hash, record.key_id, record.public_key)
    for line, limit in meta["budget_limits"].items():
        engine.budgets[line] = BudgetLine(line, limit, projection.budget_spent.get(line, 0))

    receipts = HeadReceiptLog(
        receipts=[
            HeadReceipt(r["height"], bytes.fromhex(r["block_hash"]))
            for r in json.loads((path / "receipts.json").read_text(encoding="utf-8"))["receipts"]
        ]
    )

    return SimulationEnv(
        scheme=scheme,
        validators=validators,
        key_registry=registry,
        keystore=keystore,
        chain=chain,
        engine=engine,
        clock=clock,
        receipts=receipts,
        model=model,
        background=background,
        inference_keys=inference_keys,
        decision_threshold_bps=meta["decision_threshold_bps"],
        train_config=GeneratorConfig(**meta["train_config"]),
        seed=meta["seed"],
        payment_counter=meta["payment_counter"],
    )
