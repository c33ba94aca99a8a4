"""Simulation wiring: keys, validators, chain, engine, detector, explainer.

One ``SimulationEnv`` is a complete deployment in memory: a validator set
committing blocks, a key registry of actors, a trained detector whose
model hash is attested on-chain, the pinned explanation background, and a
deterministic millisecond clock. Everything derives from a single seed.

After every commit the auditors' head receipt log records (height, block
hash); that external reference is what makes tail truncation detectable,
since the hash chain alone cannot see its own missing suffix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..consensus import QuorumSigner, ValidatorSet, quorum_size
from ..datagen import GeneratorConfig, generate
from ..detector import TrainParams, TreeEnsemble, train
from ..detector.metrics import best_f1_threshold
from ..explain import build_assessment_record, draw_background, shapley_paths
from ..ledger.chain import LedgerChain
from ..ledger.signing import KeyedHashScheme, KeyPair, KeyRegistry, SignatureScheme
from ..records import AssessmentRecord, PaymentRequest
from ..workflow import AttestationRegistry, Role, WorkflowEngine


class SimClock:
    """Deterministic simulated unix-millisecond clock."""

    def __init__(self, start_ms: int = 1_760_000_000_000, step_ms: int = 1_000) -> None:
        self.now_ms = start_ms
        self.step_ms = step_ms

    def __call__(self) -> int:
        current = self.now_ms
        self.now_ms += self.step_ms
        return current

    def advance(self, delta_ms: int) -> None:
        self.now_ms += delta_ms


@dataclass
class HeadReceipt:
    height: int
    block_hash: bytes

    def to_json(self) -> dict:
        return {"height": self.height, "block_hash": self.block_hash.hex()}


@dataclass
class HeadReceiptLog:
    """External auditor-side record of every committed chain head."""

    receipts: list[HeadReceipt] = field(default_factory=list)

    def record(self, chain: LedgerChain) -> None:
        if chain.height:
            self.receipts.append(HeadReceipt(chain.height, chain.head_hash()))

    @property
    def latest(self) -> HeadReceipt | None:
        return self.receipts[-1] if self.receipts else None

    def check(self, chain: LedgerChain) -> list[str]:
        """Discrepancies between the chain and the latest receipt."""
        latest = self.latest
        if latest is None:
            return []
        problems = []
        if chain.height < latest.height:
            problems.append(
                f"chain head at height {chain.height} but auditors hold a receipt for height "
                f"{latest.height}: the tail was truncated"
            )
        elif chain.height >= latest.height:
            try:
                actual = chain.block_at(latest.height).block_hash()
            except IndexError:
                actual = b""
            if actual != latest.block_hash:
                problems.append(f"block at height {latest.height} does not match the auditors' head receipt")
        return problems


_DEFAULT_ACTORS: Mapping[str, tuple[Role, ...]] = {
    "alice": (Role.REQUESTER,),
    "bob": (Role.REQUESTER,),
    "mia": (Role.MANAGER,),
    "frank": (Role.FINANCE,),
    "system": (Role.SYSTEM,),
    "admin": (),
}


@dataclass
class SimulationEnv:
    scheme: SignatureScheme
    validators: ValidatorSet
    key_registry: KeyRegistry
    keystore: dict[str, KeyPair]
    chain: LedgerChain
    engine: WorkflowEngine
    clock: SimClock
    receipts: HeadReceiptLog
    model: TreeEnsemble
    background: np.ndarray
    inference_keys: list[KeyPair]
    decision_threshold_bps: int
    train_config: GeneratorConfig
    seed: int
    payment_counter: int = 0

    # -- payment plumbing -----------------------------------------------------

    def next_payment_id(self) -> str:
        self.payment_counter += 1
        return f"PAY-{self.payment_counter:06d}"

    def make_assessment(self, payment_id: str, x: np.ndarray, *, signer_count: int | None = None) -> AssessmentRecord:
        """Score, explain and sign one feature vector for on-chain recording."""
        score = self.model.predict_one(x)
        explanation = shapley_paths(self.model, x, self.background)
        if signer_count is None:
            signer_count = self.engine.registry.score_quorum
        signers = [(kp.key_id, kp.secret) for kp in self.inference_keys[:signer_count]]
        return build_assessment_record(
            payment_id=payment_id,
            model=self.model,
            explanation=explanation,
            score=score,
            signers=signers,
            scheme=self.scheme,
        )

    def submit_payment(
        self,
        *,
        requester: str,
        vendor: str,
        amount_cents: int,
        budget_line: str,
        features: np.ndarray,
        payment_id: str | None = None,
        assessment: AssessmentRecord | None = None,
    ):
        payment_id = payment_id or self.next_payment_id()
        request = PaymentRequest(
            payment_id=payment_id,
            requester=requester,
            vendor=vendor,
            amount_cents=amount_cents,
            budget_line=budget_line,
            submitted_at_ms=self.clock.now_ms,
        )
        if assessment is None:
            assessment = self.make_assessment(payment_id, features)
        view = self.engine.create_payment(request, assessment)
        self.receipts.record(self.chain)
        return view

    def transition(self, actor: str, payment_id: str, action, *, role: Role | None = None):
        state = self.engine.transition(actor, payment_id, action, role=role)
        self.receipts.record(self.chain)
        return state


def bootstrap(
    seed: int = 0,
    *,
    n_validators: int = 4,
    score_quorum: int = 1,
    n_inference_keys: int | None = None,
    train_config: GeneratorConfig | None = None,
    train_params: TrainParams | None = None,
    model: TreeEnsemble | None = None,
    training_features: np.ndarray | None = None,
    decision_threshold: float | None = None,
    extra_actors: Mapping[str, Sequence[Role]] | None = None,
    clock: SimClock | None = None,
) -> SimulationEnv:
    """Stand up a full deployment from one seed.

    Training dominates bootstrap time; pass a prebuilt ``model`` (plus the
    ``training_features`` it was fitted on, for the background sample) to
    reuse one across scenarios.
    """
    scheme = KeyedHashScheme()
    seed_bytes = seed.to_bytes(8, "big", signed=True)
    validators = ValidatorSet.make(n_validators, scheme, seed=seed)
    clock = clock or SimClock()

    registry = KeyRegistry(scheme)
    keystore: dict[str, KeyPair] = {}
    roles: dict[str, set[Role]] = {}
    actor_roles: dict[str, tuple[Role, ...]] = dict(_DEFAULT_ACTORS)
    for actor, extra in (extra_actors or {}).items():
        actor_roles[actor] = tuple(extra)
    for actor, held in actor_roles.items():
        kp = scheme.keypair(actor, seed_bytes)
        keystore[actor] = kp
        registry.register(actor, kp.public)
        roles[actor] = set(held)

    chain = LedgerChain(
        scheme=scheme,
        validator_keys=validators.public_keys(),
        quorum=quorum_size(n_validators),
        key_registry=registry,
    )
    signer = QuorumSigner(validators)

    train_config = train_config or GeneratorConfig()
    if model is None:
        generated = generate(train_config)
        training = generated.dataset
        model = train(training, train_params or TrainParams(), seed=seed)
        training_features = training.features
        if decision_threshold is None:
            decision_threshold, _ = best_f1_threshold(training.labels, model.predict(training.features))
    else:
        if training_features is None:
            raise ValueError("a prebuilt model needs its training features for the background sample")
        if decision_threshold is None:
            decision_threshold = 0.5
    background = draw_background(training_features, size=100, seed=7)
    threshold = decision_threshold

    attestations = AttestationRegistry(scheme, score_quorum=score_quorum)
    engine = WorkflowEngine(
        chain=chain,
        registry=attestations,
        keystore=keystore,
        roles=roles,
        committer=signer.collect,
        clock=clock,
    )
    receipts = HeadReceiptLog()

    n_keys = n_inference_keys if n_inference_keys is not None else max(score_quorum, 1)
    inference_keys = []
    for i in range(n_keys):
        kp = scheme.keypair(f"inference-{i}", seed_bytes)
        inference_keys.append(kp)
        engine.register_model(model.model_hash, kp.key_id, kp.public)
        receipts.record(chain)

    env = SimulationEnv(
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
        decision_threshold_bps=int(round(threshold * 10_000)),
        train_config=train_config,
        seed=seed,
    )
    return env
