"""Seven-state payment approval contract metered in gas.

Every transition is one committed ledger block; creation refuses to happen
without a quorum of signed fraud assessments for the currently registered
model, and the assessment lands in the same block as the creation
transition, so there is no observable state in which an approval exists
without its record. The whole machine is a pure function of the committed
chain: ``WorkflowProjection.from_chain`` rebuilds identical state from the
entries alone.

State order follows the canonical listing (finance approval before the
budget check); cancellation belongs to the original requester and is
impossible once finance has approved.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .ledger.chain import CommitVote, EntryKind, LedgerChain, LedgerEntry, make_entry
from .ledger.signing import KeyPair, SignatureScheme
from .records import AssessmentRecord, AttestationRecord, PaymentRequest, TransitionRecord


class WorkflowError(Exception):
    pass


class MissingAssessment(WorkflowError):
    """Creation attempted without a fraud assessment: the bypass attack."""


class UnregisteredModel(WorkflowError):
    pass


class BadInferenceSignature(WorkflowError):
    pass


class MalformedAssessment(WorkflowError):
    pass


class InsufficientScoreQuorum(WorkflowError):
    pass


class DuplicatePayment(WorkflowError):
    pass


class UnknownPayment(WorkflowError):
    pass


class UnknownBudgetLine(WorkflowError):
    pass


class NotAuthorized(WorkflowError):
    pass


class InvalidTransition(WorkflowError):
    pass


class BudgetExceeded(WorkflowError):
    pass


class DuplicateRegistration(WorkflowError):
    pass


class WorkflowState(enum.IntEnum):
    CREATED = 1
    MANAGER_APPROVED = 2
    FINANCE_APPROVED = 3
    BUDGET_CHECKED = 4
    EXECUTED = 5
    REJECTED = 6
    CANCELLED = 7


_STATE_NONE = 0  # pre-creation sentinel in transition records

TERMINAL_STATES = frozenset({WorkflowState.EXECUTED, WorkflowState.REJECTED, WorkflowState.CANCELLED})


class Action(enum.IntEnum):
    CREATE = 1
    MANAGER_APPROVE = 2
    FINANCE_APPROVE = 3
    BUDGET_CHECK = 4
    EXECUTE = 5
    REJECT = 6
    CANCEL = 7


class Role(str, enum.Enum):
    MANAGER = "manager"
    FINANCE = "finance"
    SYSTEM = "system"
    REQUESTER = "requester"


# Gas units per transition; the happy path (create + assessment storage +
# both approvals + budget check + execute) meters exactly 751_000.
GAS_SCHEDULE: Mapping[str, int] = {
    "Create": 251_000,
    "AssessmentStorage": 120_000,
    "ManagerApprove": 90_000,
    "FinanceApprove": 90_000,
    "BudgetCheck": 80_000,
    "Execute": 120_000,
    "Reject": 45_000,
    "Cancel": 45_000,
}

_ACTION_GAS_KEY = {
    Action.CREATE: "Create",
    Action.MANAGER_APPROVE: "ManagerApprove",
    Action.FINANCE_APPROVE: "FinanceApprove",
    Action.BUDGET_CHECK: "BudgetCheck",
    Action.EXECUTE: "Execute",
    Action.REJECT: "Reject",
    Action.CANCEL: "Cancel",
}


def gas_of(action: Action) -> int:
    return GAS_SCHEDULE[_ACTION_GAS_KEY[action]]


HAPPY_PATH_GAS = (
    GAS_SCHEDULE["Create"]
    + GAS_SCHEDULE["AssessmentStorage"]
    + GAS_SCHEDULE["ManagerApprove"]
    + GAS_SCHEDULE["FinanceApprove"]
    + GAS_SCHEDULE["BudgetCheck"]
    + GAS_SCHEDULE["Execute"]
)

# The contract's transition table: state -> admissible action -> next state.
TRANSITIONS: Mapping[WorkflowState, Mapping[Action, WorkflowState]] = {
    WorkflowState.CREATED: {
        Action.MANAGER_APPROVE: WorkflowState.MANAGER_APPROVED,
        Action.REJECT: WorkflowState.REJECTED,
        Action.CANCEL: WorkflowState.CANCELLED,
    },
    WorkflowState.MANAGER_APPROVED: {
        Action.FINANCE_APPROVE: WorkflowState.FINANCE_APPROVED,
        Action.REJECT: WorkflowState.REJECTED,
        Action.CANCEL: WorkflowState.CANCELLED,
    },
    WorkflowState.FINANCE_APPROVED: {
        Action.BUDGET_CHECK: WorkflowState.BUDGET_CHECKED,
        Action.REJECT: WorkflowState.REJECTED,
    },
    WorkflowState.BUDGET_CHECKED: {
        Action.EXECUTE: WorkflowState.EXECUTED,
        Action.REJECT: WorkflowState.REJECTED,
    },
    WorkflowState.EXECUTED: {},
    WorkflowState.REJECTED: {},
    WorkflowState.CANCELLED: {},
}

_ACTION_ROLES: Mapping[Action, tuple[Role, ...]] = {
    Action.MANAGER_APPROVE: (Role.MANAGER,),
    Action.FINANCE_APPROVE: (Role.FINANCE,),
    Action.BUDGET_CHECK: (Role.SYSTEM,),
    Action.EXECUTE: (Role.SYSTEM,),
    Action.REJECT: (Role.MANAGER, Role.FINANCE),
    Action.CANCEL: (Role.REQUESTER,),
}


@dataclass
class BudgetLine:
    budget_id: str
    limit_cents: int
    spent_cents: int = 0

    @property
    def available_cents(self) -> int:
        return self.limit_cents - self.spent_cents


@dataclass
class AttestationRegistry:
    """Registered model hashes and the inference keys allowed to score for them."""

    scheme: SignatureScheme
    score_quorum: int = 1
    _keys: dict[bytes, dict[str, bytes]] = field(default_factory=dict)

    def register(self, model_hash: bytes, key_id: str, public_key: bytes) -> None:
        if self.is_key_registered(model_hash, key_id):
            raise DuplicateRegistration(f"key {key_id!r} already registered for this model hash")
        self._keys.setdefault(model_hash, {})[key_id] = public_key

    def is_key_registered(self, model_hash: bytes, key_id: str) -> bool:
        return key_id in self._keys.get(model_hash, {})

    def is_registered(self, model_hash: bytes) -> bool:
        return model_hash in self._keys

    def keys_for(self, model_hash: bytes) -> Mapping[str, bytes]:
        return self._keys.get(model_hash, {})

    def valid_signature_count(self, assessment: AssessmentRecord) -> int:
        """Distinct registered keys whose signature over the assessment verifies.

        Any signature that fails to verify is an integrity violation, not a
        shortfall, and raises immediately.
        """
        keys = self.keys_for(assessment.model_hash)
        message = assessment.signing_bytes()
        counted: set[str] = set()
        for key_id, signature in assessment.signatures:
            public = keys.get(key_id)
            if public is None or not self.scheme.verify(public, message, signature):
                raise BadInferenceSignature(f"assessment signature by {key_id!r} does not verify")
            counted.add(key_id)
        return len(counted)


@dataclass
class PaymentView:
    """Current state of one payment as derived from committed entries."""

    request: PaymentRequest
    state: WorkflowState
    assessment: AssessmentRecord
    history: list[TransitionRecord] = field(default_factory=list)
    gas_used: int = 0
    manager_actor: str | None = None
    finance_actor: str | None = None

    @property
    def is_terminal(self) -> bool:
        return self.state in TERMINAL_STATES


def validate_assessment_shape(assessment: AssessmentRecord) -> None:
    if not 0 <= assessment.score_bps <= 10_000:
        raise MalformedAssessment(f"score_bps {assessment.score_bps} outside 0..10000")
    if len(assessment.top_features) != 5:
        raise MalformedAssessment(f"expected exactly 5 top features, got {len(assessment.top_features)}")
    mags = [abs(f.contribution_micro) for f in assessment.top_features]
    if any(mags[i] < mags[i + 1] for i in range(len(mags) - 1)):
        raise MalformedAssessment("top features must be ordered by descending |contribution|")
    if not assessment.signatures:
        raise BadInferenceSignature("assessment carries no inference signatures")


class WorkflowEngine:
    """Single writer over the ledger for one enterprise deployment.

    ``keystore`` holds the signing keys of every actor that authors entries
    (employees, approvers, the system actor); ``committer`` turns a block
    header digest into commit votes, normally by asking the honest
    validators to sign.
    """

    def __init__(
        self,
        *,
        chain: LedgerChain,
        registry: AttestationRegistry,
        keystore: Mapping[str, KeyPair],
        roles: Mapping[str, set[Role]],
        committer: Callable[[bytes], Sequence[CommitVote]],
        clock: Callable[[], int],
        system_actor: str = "system",
    ) -> None:
        self.chain = chain
        self.registry = registry
        self.keystore = dict(keystore)
        self.roles = {actor: set(r) for actor, r in roles.items()}
        self.committer = committer
        self.clock = clock
        self.system_actor = system_actor
        self.payments: dict[str, PaymentView] = {}
        self.budgets: dict[str, BudgetLine] = {}

    # -- wiring --------------------------------------------------------------

    def add_budget_line(self, budget_id: str, limit_cents: int) -> None:
        self.budgets[budget_id] = BudgetLine(budget_id, limit_cents)

    def grant_role(self, actor: str, role: Role) -> None:
        self.roles.setdefault(actor, set()).add(role)

    def _signer(self, actor: str) -> KeyPair:
        try:
            return self.keystore[actor]
        except KeyError:
            raise NotAuthorized(f"actor {actor!r} holds no signing key") from None

    def _commit(self, entries: Sequence[LedgerEntry], block_time_ms: int):
        digest = self.chain.next_header_digest(entries, block_time_ms)
        votes = self.committer(digest)
        return self.chain.append_entries(entries, votes, block_time_ms)

    # -- model attestation -----------------------------------------------------

    def register_model(self, model_hash: bytes, key_id: str, public_key: bytes, *, registered_by: str = "admin") -> None:
        """Commit a model-hash attestation; creation only accepts attested models."""
        if self.registry.is_key_registered(model_hash, key_id):
            raise DuplicateRegistration(f"key {key_id!r} already registered for this model hash")
        now = self.clock()
        record = AttestationRecord(
            model_hash=model_hash,
            key_id=key_id,
            public_key=public_key,
            score_quorum=self.registry.score_quorum,
            registered_by=registered_by,
            timestamp_ms=now,
        )
        signer = self._signer(registered_by)
        entry = make_entry(
            entry_id=self.chain.next_entry_id,
            kind=EntryKind.ATTESTATION_REGISTERED,
            payload=record.encode(),
            author=registered_by,
            timestamp_ms=now,
            scheme=self.chain.scheme,
            secret=signer.secret,
        )
        self._commit([entry], now)
        self.registry.register(model_hash, key_id, public_key)

    # -- creation --------------------------------------------------------------

    def create_payment(self, request: PaymentRequest, assessment: AssessmentRecord | None) -> PaymentView:
        if assessment is None:
            raise MissingAssessment("payment creation requires a recorded fraud assessment")
        if request.payment_id in self.payments:
            raise DuplicatePayment(f"payment {request.payment_id!r} already exists")
        if request.budget_line not in self.budgets:
            raise UnknownBudgetLine(f"budget line {request.budget_line!r} is not provisioned")
        if assessment.payment_id != request.payment_id:
            raise BadInferenceSignature(
                f"assessment binds payment {assessment.payment_id!r}, not {request.payment_id!r}"
            )
        validate_assessment_shape(assessment)
        if not self.registry.is_registered(assessment.model_hash):
            raise UnregisteredModel(f"model hash {assessment.model_hash.hex()[:16]} is not attested")
        valid = self.registry.valid_signature_count(assessment)
        if valid < self.registry.score_quorum:
            raise InsufficientScoreQuorum(
                f"{valid} matching signed scores, need {self.registry.score_quorum}"
            )

        now = self.clock()
        gas = GAS_SCHEDULE["Create"] + GAS_SCHEDULE["AssessmentStorage"]
        transition = TransitionRecord(
            payment_id=request.payment_id,
            action=int(Action.CREATE),
            from_state=_STATE_NONE,
            to_state=int(WorkflowState.CREATED),
            actor=request.requester,
            role=Role.REQUESTER.value,
            gas=gas,
            timestamp_ms=now,
            request=request,
        )
        signer = self._signer(request.requester)
        next_id = self.chain.next_entry_id
        entries = [
            make_entry(
                entry_id=next_id,
                kind=EntryKind.ASSESSMENT_RECORDED,
                payload=assessment.encode(),
                author=request.requester,
                timestamp_ms=now,
                scheme=self.chain.scheme,
                secret=signer.secret,
            ),
            make_entry(
                entry_id=next_id + 1,
                kind=EntryKind.STATE_TRANSITION,
                payload=transition.encode(),
                author=request.requester,
                timestamp_ms=now,
                scheme=self.chain.scheme,
                secret=signer.secret,
            ),
        ]
        self._commit(entries, now)
        view = PaymentView(request=request, state=WorkflowState.CREATED, assessment=assessment,
                           history=[transition], gas_used=gas)
        self.payments[request.payment_id] = view
        return view

    # -- transitions -------------------------------------------------------------

    def transition(
        self, actor: str, payment_id: str, action: Action, *, role: Role | None = None, reason: str = ""
    ) -> WorkflowState:
        view = self.payments.get(payment_id)
        if view is None:
            raise UnknownPayment(f"payment {payment_id!r} does not exist")
        admissible = TRANSITIONS[view.state]
        if action not in admissible:
            raise InvalidTransition(f"action {action.name} is not admitted from state {view.state.name}")

        allowed_roles = _ACTION_ROLES[action]
        if role is None:
            held = self.roles.get(actor, set())
            role = next((r for r in allowed_roles if r in held or r is Role.REQUESTER), allowed_roles[0])
        if role not in allowed_roles:
            raise NotAuthorized(f"action {action.name} cannot be exercised under role {role.value!r}")
        if role is Role.REQUESTER:
            if actor != view.request.requester:
                raise NotAuthorized(f"{actor!r} is not the original requester of {payment_id!r}")
        elif role not in self.roles.get(actor, set()):
            raise NotAuthorized(f"actor {actor!r} does not hold role {role.value!r}")

        to_state = admissible[action]
        if action is Action.BUDGET_CHECK:
            line = self.budgets[view.request.budget_line]
            if view.request.amount_cents > line.available_cents:
                to_state = WorkflowState.REJECTED
                reason = (
                    f"budget_exceeded: amount {view.request.amount_cents} over available "
                    f"{line.available_cents} on {line.budget_id}"
                )
        if action is Action.EXECUTE:
            line = self.budgets[view.request.budget_line]
            if view.request.amount_cents > line.available_cents:
                # BudgetCheck precedes Execute, so this only trips if the line
                # was drained between the two system steps.
                raise BudgetExceeded(f"execution would overdraw budget line {line.budget_id}")

        now = self.clock()
        gas = gas_of(action)
        record = TransitionRecord(
            payment_id=payment_id,
            action=int(action),
            from_state=int(view.state),
            to_state=int(to_state),
            actor=actor,
            role=role.value,
            gas=gas,
            timestamp_ms=now,
            reason=reason,
        )
        signer = self._signer(actor)
        entry = make_entry(
            entry_id=self.chain.next_entry_id,
            kind=EntryKind.STATE_TRANSITION,
            payload=record.encode(),
            author=actor,
            timestamp_ms=now,
            scheme=self.chain.scheme,
            secret=signer.secret,
        )
        self._commit([entry], now)

        view.state = to_state
        view.history.append(record)
        view.gas_used += gas
        if action is Action.MANAGER_APPROVE:
            view.manager_actor = actor
        elif action is Action.FINANCE_APPROVE:
            view.finance_actor = actor
        elif action is Action.EXECUTE:
            self.budgets[view.request.budget_line].spent_cents += view.request.amount_cents
        return to_state

    # -- audit surface -------------------------------------------------------------

    def decision_trail(self, payment_id: str) -> "DecisionTrail":
        if payment_id not in self.payments:
            raise UnknownPayment(f"payment {payment_id!r} does not exist")
        return build_decision_trail(self.chain, payment_id)


@dataclass(frozen=True)
class TrailItem:
    entry: LedgerEntry
    record: AssessmentRecord | TransitionRecord
    proof: "object"
    proof_verified: bool

    def to_json(self) -> dict:
        from .ledger.chain import InclusionProof

        proof = self.proof
        assert isinstance(proof, InclusionProof)
        return {
            "entry_id": self.entry.entry_id,
            "kind": self.entry.kind.name,
            "author": self.entry.author,
            "timestamp_ms": self.entry.timestamp_ms,
            "record": self.record.to_json(),
            "inclusion_proof": proof.to_json(),
            "proof_verified": self.proof_verified,
        }


@dataclass(frozen=True)
class DecisionTrail:
    """Every committed fact about one payment, each with its inclusion proof."""

    payment_id: str
    items: tuple[TrailItem, ...]
    dual_approver: bool
    dual_approver_actor: str | None
    approval_window_ms: int | None

    def to_json(self) -> dict:
        return {
            "payment_id": self.payment_id,
            "entries": [item.to_json() for item in self.items],
            "flags": {
                "dual_approver": self.dual_approver,
                "dual_approver_actor": self.dual_approver_actor,
                "approval_window_ms": self.approval_window_ms,
            },
        }

    def to_markdown(self) -> str:
        lines = [f"# Decision trail for {self.payment_id}", ""]
        if self.dual_approver:
            lines.append(
                f"> **Flag**: manager and finance approvals both cast by "
                f"`{self.dual_approver_actor}` within {self.approval_window_ms} ms."
            )
            lines.append("")
        lines.append("| entry | kind | actor | timestamp (ms) | detail | proof |")
        lines.append("|---|---|---|---|---|---|")
        for item in self.items:
            if isinstance(item.record, AssessmentRecord):
                detail = f"score {item.record.score_bps} bps, model {item.record.model_hash.hex()[:12]}"
            else:
                detail = f"{Action(item.record.action).name}: {_state_name(item.record.from_state)} to {_state_name(item.record.to_state)}"
                if item.record.reason:
                    detail += f" ({item.record.reason})"
                detail += f", gas {item.record.gas}"
            proof = "ok" if item.proof_verified else "FAILED"
            lines.append(
                f"| {item.entry.entry_id} | {item.entry.kind.name} | {item.entry.author} "
                f"| {item.entry.timestamp_ms} | {detail} | {proof} |"
            )
        return "\n".join(lines) + "\n"


def _state_name(value: int) -> str:
    return "NONE" if value == _STATE_NONE else WorkflowState(value).name


def build_decision_trail(chain: LedgerChain, payment_id: str) -> DecisionTrail:
    items: list[TrailItem] = []
    approvals: dict[Action, TransitionRecord] = {}
    for block in chain.blocks:
        for entry in block.entries:
            record: AssessmentRecord | TransitionRecord | None = None
            if entry.kind is EntryKind.ASSESSMENT_RECORDED:
                decoded = AssessmentRecord.decode(entry.payload)
                if decoded.payment_id == payment_id:
                    record = decoded
            elif entry.kind is EntryKind.STATE_TRANSITION:
                decoded = TransitionRecord.decode(entry.payload)
                if decoded.payment_id == payment_id:
                    record = decoded
                    action = Action(decoded.action)
                    if action in (Action.MANAGER_APPROVE, Action.FINANCE_APPROVE):
                        approvals[action] = decoded
            if record is None:
                continue
            proof = chain.prove_inclusion(entry.entry_id)
            from .ledger.chain import verify_inclusion

            verified = verify_inclusion(chain.block_at(proof.block_height).merkle_root, proof, entry)
            items.append(TrailItem(entry, record, proof, verified))
    if not items:
        raise UnknownPayment(f"payment {payment_id!r} has no committed entries")

    manager = approvals.get(Action.MANAGER_APPROVE)
    finance = approvals.get(Action.FINANCE_APPROVE)
    dual = bool(manager and finance and manager.actor == finance.actor)
    window = None
    if manager and finance:
        window = abs(finance.timestamp_ms - manager.timestamp_ms)
    return DecisionTrail(
        payment_id=payment_id,
        items=tuple(items),
        dual_approver=dual,
        dual_approver_actor=manager.actor if dual and manager else None,
        approval_window_ms=window,
    )


@dataclass
class WorkflowProjection:
    """State rebuilt purely from committed entries; the replay oracle."""

    payments: dict[str, PaymentView] = field(default_factory=dict)
    budget_spent: dict[str, int] = field(default_factory=dict)
    attestations: list[AttestationRecord] = field(default_factory=list)
    transition_count: int = 0
    total_gas: int = 0

    @classmethod
    def from_chain(cls, chain: LedgerChain) -> "WorkflowProjection":
        proj = cls()
        pending: dict[str, AssessmentRecord] = {}
        for entry in chain.entries():
            if entry.kind is EntryKind.ATTESTATION_REGISTERED:
                proj.attestations.append(AttestationRecord.decode(entry.payload))
            elif entry.kind is EntryKind.ASSESSMENT_RECORDED:
                record = AssessmentRecord.decode(entry.payload)
                pending[record.payment_id] = record
            elif entry.kind is EntryKind.STATE_TRANSITION:
                record = TransitionRecord.decode(entry.payload)
                proj.transition_count += 1
                proj.total_gas += record.gas
                if record.action == int(Action.CREATE):
                    assert record.request is not None
                    view = PaymentView(
                        request=record.request,
                        state=WorkflowState(record.to_state),
                        assessment=pending.pop(record.payment_id),
                        history=[record],
                        gas_used=record.gas,
                    )
                    proj.payments[record.payment_id] = view
                else:
                    view = proj.payments[record.payment_id]
                    view.state = WorkflowState(record.to_state)
                    view.history.append(record)
                    view.gas_used += record.gas
                    action = Action(record.action)
                    if action is Action.MANAGER_APPROVE:
                        view.manager_actor = record.actor
                    elif action is Action.FINANCE_APPROVE:
                        view.finance_actor = record.actor
                    elif action is Action.EXECUTE:
                        spent = proj.budget_spent.get(view.request.budget_line, 0)
                        proj.budget_spent[view.request.budget_line] = spent + view.request.amount_cents
        return proj
