"""Seven-state contract: creation gating, roles, gas metering, trails, replay."""

from __future__ import annotations

import itertools

import pytest

from paychain.consensus import QuorumSigner, ValidatorSet, quorum_size
from paychain.ledger import EntryKind, KeyRegistry, KeyedHashScheme, LedgerChain, sha256
from paychain.records import AssessmentRecord, PaymentRequest, TopFeature
from paychain.workflow import (
    Action,
    AttestationRegistry,
    BadInferenceSignature,
    BudgetExceeded,
    DuplicatePayment,
    DuplicateRegistration,
    GAS_SCHEDULE,
    HAPPY_PATH_GAS,
    InsufficientScoreQuorum,
    InvalidTransition,
    MalformedAssessment,
    MissingAssessment,
    NotAuthorized,
    Role,
    TERMINAL_STATES,
    TRANSITIONS,
    UnknownPayment,
    UnregisteredModel,
    WorkflowEngine,
    WorkflowProjection,
    WorkflowState,
    build_decision_trail,
    gas_of,
)

SCHEME = KeyedHashScheme()
MODEL_HASH = sha256(b"registered-model")
OTHER_HASH = sha256(b"unregistered-model")


class StepClock:
    def __init__(self) -> None:
        self.now = 1_000_000

    def __call__(self) -> int:
        self.now += 1_000
        return self.now


def make_engine(score_quorum: int = 1, n_keys: int | None = None, register: bool = True):
    validators = ValidatorSet.make(4, SCHEME, seed=0)
    registry = KeyRegistry(SCHEME)
    keystore = {}
    roles = {
        "alice": {Role.REQUESTER},
        "mia": {Role.MANAGER},
        "frank": {Role.FINANCE},
        "dana": {Role.MANAGER, Role.FINANCE},
        "system": {Role.SYSTEM},
        "admin": set(),
    }
    for actor in roles:
        kp = SCHEME.keypair(actor, b"workflow-test")
        keystore[actor] = kp
        registry.register(actor, kp.public)
    chain = LedgerChain(
        scheme=SCHEME,
        validator_keys=validators.public_keys(),
        quorum=quorum_size(4),
        key_registry=registry,
    )
    engine = WorkflowEngine(
        chain=chain,
        registry=AttestationRegistry(SCHEME, score_quorum=score_quorum),
        keystore=keystore,
        roles=roles,
        committer=QuorumSigner(validators).collect,
        clock=StepClock(),
    )
    engine.add_budget_line("OPS", 10_000_00)
    keys = [SCHEME.keypair(f"inference-{i}", b"workflow-test") for i in range(n_keys or max(score_quorum, 1))]
    if register:
        for kp in keys:
            engine.register_model(MODEL_HASH, kp.key_id, kp.public)
    return engine, keys


def make_assessment(payment_id: str, keys, *, score_bps: int = 9_200, model_hash: bytes = MODEL_HASH,
                    n_signatures: int | None = None) -> AssessmentRecord:
    features = tuple(TopFeature(i, 500_000 - i * 50_000) for i in range(5))
    unsigned = AssessmentRecord(payment_id, model_hash, score_bps, features, -1_200_000, b"\x07" * 32, ())
    message = unsigned.signing_bytes()
    signers = keys if n_signatures is None else keys[:n_signatures]
    return AssessmentRecord(
        payment_id, model_hash, score_bps, features, -1_200_000, b"\x07" * 32,
        tuple((kp.key_id, SCHEME.sign(kp.secret, message)) for kp in signers),
    )


def request(payment_id: str = "PAY-1", amount: int = 250_00) -> PaymentRequest:
    return PaymentRequest(payment_id, "alice", "V-1", amount, "OPS", 999)


def run_happy_path(engine, keys, payment_id: str = "PAY-1", amount: int = 250_00):
    engine.create_payment(request(payment_id, amount), make_assessment(payment_id, keys))
    engine.transition("mia", payment_id, Action.MANAGER_APPROVE)
    engine.transition("frank", payment_id, Action.FINANCE_APPROVE)
    engine.transition("system", payment_id, Action.BUDGET_CHECK)
    engine.transition("system", payment_id, Action.EXECUTE)


# -- creation ------------------------------------------------------------------


def test_create_records_assessment_and_transition_atomically():
    engine, keys = make_engine()
    view = engine.create_payment(request(), make_assessment("PAY-1", keys))
    assert view.state is WorkflowState.CREATED
    assert view.gas_used == 371_000 == GAS_SCHEDULE["Create"] + GAS_SCHEDULE["AssessmentStorage"]
    block = engine.chain.blocks[-1]
    kinds = [e.kind for e in block.entries]
    assert kinds == [EntryKind.ASSESSMENT_RECORDED, EntryKind.STATE_TRANSITION]


def test_create_without_assessment_is_the_bypass_attack():
    engine, _ = make_engine()
    with pytest.raises(MissingAssessment):
        engine.create_payment(request(), None)
    assert engine.chain.height == 1  # only the attestation block


def test_create_with_unregistered_model_hash():
    engine, keys = make_engine()
    with pytest.raises(UnregisteredModel):
        engine.create_payment(request(), make_assessment("PAY-1", keys, model_hash=OTHER_HASH))


def test_tampered_score_with_stale_signature():
    engine, keys = make_engine()
    honest = make_assessment("PAY-1", keys, score_bps=9_200)
    doctored = AssessmentRecord(
        honest.payment_id, honest.model_hash, 100, honest.top_features,
        honest.base_value_micro, honest.background_ref, honest.signatures,
    )
    with pytest.raises(BadInferenceSignature):
        engine.create_payment(request(), doctored)


def test_assessment_bound_to_other_payment_rejected():
    engine, keys = make_engine()
    with pytest.raises(BadInferenceSignature):
        engine.create_payment(request("PAY-1"), make_assessment("PAY-2", keys))


def test_duplicate_payment_rejected():
    engine, keys = make_engine()
    engine.create_payment(request(), make_assessment("PAY-1", keys))
    with pytest.raises(DuplicatePayment):
        engine.create_payment(request(), make_assessment("PAY-1", keys))


def test_malformed_assessments_rejected():
    engine, keys = make_engine()
    good = make_assessment("PAY-1", keys)
    out_of_range = AssessmentRecord("PAY-1", MODEL_HASH, 10_001, good.top_features,
                                    good.base_value_micro, good.background_ref, good.signatures)
    with pytest.raises(MalformedAssessment):
        engine.create_payment(request(), out_of_range)
    four = AssessmentRecord("PAY-1", MODEL_HASH, 9_000, good.top_features[:4],
                            good.base_value_micro, good.background_ref, good.signatures)
    with pytest.raises(MalformedAssessment):
        engine.create_payment(request(), four)
    unordered = AssessmentRecord("PAY-1", MODEL_HASH, 9_000, tuple(reversed(good.top_features)),
                                 good.base_value_micro, good.background_ref, good.signatures)
    with pytest.raises(MalformedAssessment):
        engine.create_payment(request(), unordered)


def test_committee_scoring_quorum_two_of_three():
    engine, keys = make_engine(score_quorum=2, n_keys=3)
    engine.create_payment(request("PAY-OK"), make_assessment("PAY-OK", keys, n_signatures=2))
    assert engine.payments["PAY-OK"].state is WorkflowState.CREATED
    with pytest.raises(InsufficientScoreQuorum):
        engine.create_payment(request("PAY-NO"), make_assessment("PAY-NO", keys, n_signatures=1))


def test_register_model_duplicate_rejected():
    engine, keys = make_engine()
    with pytest.raises(DuplicateRegistration):
        engine.register_model(MODEL_HASH, keys[0].key_id, keys[0].public)


# -- transition table and roles ---------------------------------------------------


def test_happy_path_states_and_total_gas():
    engine, keys = make_engine()
    run_happy_path(engine, keys)
    view = engine.payments["PAY-1"]
    assert view.state is WorkflowState.EXECUTED
    assert view.gas_used == HAPPY_PATH_GAS == 751_000
    assert [WorkflowState(t.to_state) for t in view.history] == [
        WorkflowState.CREATED, WorkflowState.MANAGER_APPROVED, WorkflowState.FINANCE_APPROVED,
        WorkflowState.BUDGET_CHECKED, WorkflowState.EXECUTED,
    ]


def test_gas_of_reference_values():
    assert gas_of(Action.EXECUTE) == 120_000
    assert gas_of(Action.REJECT) == 45_000
    assert gas_of(Action.CREATE) == 251_000
    reject_path = GAS_SCHEDULE["Create"] + GAS_SCHEDULE["AssessmentStorage"] + GAS_SCHEDULE["Reject"]
    assert reject_path == 371_000 + 45_000


def test_execute_from_created_is_invalid():
    engine, keys = make_engine()
    engine.create_payment(request(), make_assessment("PAY-1", keys))
    with pytest.raises(InvalidTransition):
        engine.transition("system", "PAY-1", Action.EXECUTE)


def test_wrong_role_rejected():
    engine, keys = make_engine()
    engine.create_payment(request(), make_assessment("PAY-1", keys))
    with pytest.raises(NotAuthorized):
        engine.transition("frank", "PAY-1", Action.MANAGER_APPROVE)  # finance is not manager
    with pytest.raises(NotAuthorized):
        engine.transition("alice", "PAY-1", Action.MANAGER_APPROVE, role=Role.MANAGER)
    with pytest.raises(NotAuthorized):
        engine.transition("system", "PAY-1", Action.REJECT)  # reject needs manager or finance


def test_cancel_is_requester_only_and_dies_after_finance():
    engine, keys = make_engine()
    engine.create_payment(request(), make_assessment("PAY-1", keys))
    with pytest.raises(NotAuthorized):
        engine.transition("mia", "PAY-1", Action.CANCEL)
    engine.transition("mia", "PAY-1", Action.MANAGER_APPROVE)
    engine.transition("frank", "PAY-1", Action.FINANCE_APPROVE)
    with pytest.raises(InvalidTransition):
        engine.transition("alice", "PAY-1", Action.CANCEL)


def test_cancel_by_requester_before_finance():
    engine, keys = make_engine()
    engine.create_payment(request(), make_assessment("PAY-1", keys))
    assert engine.transition("alice", "PAY-1", Action.CANCEL) is WorkflowState.CANCELLED


def test_unknown_payment():
    engine, _ = make_engine()
    with pytest.raises(UnknownPayment):
        engine.transition("mia", "PAY-404", Action.MANAGER_APPROVE)
    with pytest.raises(UnknownPayment):
        engine.decision_trail("PAY-404")


def test_terminal_states_reject_every_action():
    for terminal_path in (
        [Action.CANCEL],
        [Action.REJECT],
        [Action.MANAGER_APPROVE, Action.FINANCE_APPROVE, Action.BUDGET_CHECK, Action.EXECUTE],
    ):
        engine, keys = make_engine()
        engine.create_payment(request(), make_assessment("PAY-1", keys))
        actors = {
            Action.MANAGER_APPROVE: "mia", Action.FINANCE_APPROVE: "frank",
            Action.BUDGET_CHECK: "system", Action.EXECUTE: "system",
            Action.REJECT: "mia", Action.CANCEL: "alice",
        }
        for action in terminal_path:
            engine.transition(actors[action], action=action, payment_id="PAY-1")
        assert engine.payments["PAY-1"].is_terminal
        for action in actors:
            with pytest.raises(InvalidTransition):
                engine.transition(actors[action], "PAY-1", action)


def test_budget_check_rejects_over_limit_with_reason():
    engine, keys = make_engine()
    engine.create_payment(request(amount=20_000_00), make_assessment("PAY-1", keys))  # limit is 10,000.00
    engine.transition("mia", "PAY-1", Action.MANAGER_APPROVE)
    engine.transition("frank", "PAY-1", Action.FINANCE_APPROVE)
    state = engine.transition("system", "PAY-1", Action.BUDGET_CHECK)
    assert state is WorkflowState.REJECTED
    view = engine.payments["PAY-1"]
    assert "budget_exceeded" in view.history[-1].reason
    assert engine.budgets["OPS"].spent_cents == 0


def test_execute_debits_budget_and_conserves_it():
    engine, keys = make_engine()
    run_happy_path(engine, keys, "PAY-1", amount=300_00)
    run_happy_path(engine, keys, "PAY-2", amount=200_00)
    line = engine.budgets["OPS"]
    assert line.spent_cents == 500_00
    assert line.spent_cents <= line.limit_cents
    projection = WorkflowProjection.from_chain(engine.chain)
    assert projection.budget_spent["OPS"] == 500_00


def test_execute_time_budget_guard():
    engine, keys = make_engine()
    engine.create_payment(request(amount=9_000_00), make_assessment("PAY-1", keys))
    engine.transition("mia", "PAY-1", Action.MANAGER_APPROVE)
    engine.transition("frank", "PAY-1", Action.FINANCE_APPROVE)
    engine.transition("system", "PAY-1", Action.BUDGET_CHECK)
    engine.budgets["OPS"].spent_cents = 9_500_00  # drained between the system steps
    with pytest.raises(BudgetExceeded):
        engine.transition("system", "PAY-1", Action.EXECUTE)


# -- exhaustive table enumeration ---------------------------------------------------


def _table_walk(state: WorkflowState, actions: tuple[Action, ...]) -> WorkflowState | None:
    """Pure table walk; None when some action is inadmissible."""
    for action in actions:
        admissible = TRANSITIONS[state]
        if action not in admissible:
            return None
        state = admissible[action]
        if action is Action.BUDGET_CHECK:
            state = WorkflowState.BUDGET_CHECKED  # in-budget branch for reachability
    return state


def test_exhaustive_depth8_executed_requires_full_approval_chain():
    actions = [a for a in Action if a is not Action.CREATE]
    reached_executed = 0
    for depth in range(1, 9):
        for sequence in itertools.product(actions, repeat=depth):
            final = _table_walk(WorkflowState.CREATED, sequence)
            if final is WorkflowState.EXECUTED:
                reached_executed += 1
                assert sequence == (
                    Action.MANAGER_APPROVE, Action.FINANCE_APPROVE, Action.BUDGET_CHECK, Action.EXECUTE,
                )
    assert reached_executed == 1  # exactly one admissible route to EXECUTED


def test_exactly_seven_states_and_three_terminals():
    assert len(WorkflowState) == 7
    assert TERMINAL_STATES == {WorkflowState.EXECUTED, WorkflowState.REJECTED, WorkflowState.CANCELLED}
    for state in TERMINAL_STATES:
        assert TRANSITIONS[state] == {}


# -- ledger coupling ------------------------------------------------------------------


def test_every_state_change_is_recorded_once():
    engine, keys = make_engine()
    run_happy_path(engine, keys, "PAY-1")
    engine.create_payment(request("PAY-2"), make_assessment("PAY-2", keys))
    engine.transition("mia", "PAY-2", Action.REJECT)
    transitions = [e for e in engine.chain.entries() if e.kind is EntryKind.STATE_TRANSITION]
    state_changes = sum(len(v.history) for v in engine.payments.values())
    assert len(transitions) == state_changes == 7


def test_crash_between_decide_and_record_aborts_transition():
    engine, keys = make_engine()
    engine.create_payment(request(), make_assessment("PAY-1", keys))
    height_before = engine.chain.height

    def failing_committer(digest):
        raise RuntimeError("validator network down")

    engine.committer = failing_committer
    with pytest.raises(RuntimeError):
        engine.transition("mia", "PAY-1", Action.MANAGER_APPROVE)
    assert engine.payments["PAY-1"].state is WorkflowState.CREATED
    assert engine.chain.height == height_before
    assert len(engine.payments["PAY-1"].history) == 1


def test_projection_replays_engine_state_exactly():
    engine, keys = make_engine()
    run_happy_path(engine, keys, "PAY-1", amount=100_00)
    engine.create_payment(request("PAY-2", 50_00), make_assessment("PAY-2", keys))
    engine.transition("mia", "PAY-2", Action.MANAGER_APPROVE)
    engine.transition("dana", "PAY-2", Action.FINANCE_APPROVE)
    engine.create_payment(request("PAY-3", 70_00), make_assessment("PAY-3", keys))
    engine.transition("alice", "PAY-3", Action.CANCEL)

    projection = WorkflowProjection.from_chain(engine.chain)
    assert set(projection.payments) == set(engine.payments)
    for pid, live in engine.payments.items():
        replayed = projection.payments[pid]
        assert replayed.state is live.state
        assert replayed.gas_used == live.gas_used
        assert replayed.history == live.history
        assert replayed.manager_actor == live.manager_actor
        assert replayed.finance_actor == live.finance_actor
        assert replayed.assessment == live.assessment
    assert projection.total_gas == sum(v.gas_used for v in engine.payments.values())


# -- decision trails ------------------------------------------------------------------


def test_happy_trail_has_six_proof_carrying_entries():
    engine, keys = make_engine()
    run_happy_path(engine, keys)
    trail = engine.decision_trail("PAY-1")
    assert len(trail.items) == 6
    assert trail.items[0].entry.kind is EntryKind.ASSESSMENT_RECORDED
    assert all(item.proof_verified for item in trail.items)
    assert not trail.dual_approver
    assert trail.approval_window_ms is not None


def test_rejected_trail_ends_with_reason():
    engine, keys = make_engine()
    engine.create_payment(request(amount=20_000_00), make_assessment("PAY-1", keys))
    engine.transition("mia", "PAY-1", Action.MANAGER_APPROVE)
    engine.transition("frank", "PAY-1", Action.FINANCE_APPROVE)
    engine.transition("system", "PAY-1", Action.BUDGET_CHECK)
    trail = engine.decision_trail("PAY-1")
    last = trail.items[-1].record
    assert last.to_state == int(WorkflowState.REJECTED)
    assert "budget_exceeded" in last.reason


def test_dual_approver_is_flagged_in_the_trail():
    engine, keys = make_engine()
    engine.create_payment(request(), make_assessment("PAY-1", keys))
    engine.transition("dana", "PAY-1", Action.MANAGER_APPROVE, role=Role.MANAGER)
    engine.transition("dana", "PAY-1", Action.FINANCE_APPROVE, role=Role.FINANCE)
    trail = engine.decision_trail("PAY-1")
    assert trail.dual_approver
    assert trail.dual_approver_actor == "dana"
    assert trail.approval_window_ms <= 10 * 60 * 1000
    rendered = trail.to_markdown()
    assert "dual" in rendered.lower() or "Flag" in rendered


def test_trail_json_schema_stable():
    engine, keys = make_engine()
    run_happy_path(engine, keys)
    payload = build_decision_trail(engine.chain, "PAY-1").to_json()
    assert set(payload) == {"payment_id", "entries", "flags"}
    entry = payload["entries"][0]
    assert set(entry) == {
        "entry_id", "kind", "author", "timestamp_ms", "record", "inclusion_proof", "proof_verified",
    }
    assert set(payload["flags"]) == {"dual_approver", "dual_approver_actor", "approval_window_ms"}
