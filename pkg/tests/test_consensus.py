"""Quorum sizing, commit rounds, Byzantine behaviors, prefix consistency."""

from __future__ import annotations

import pytest

from paychain.consensus import (
    Behavior,
    RoundSchedule,
    ValidatorSet,
    check_consistency,
    constructed_divergence,
    quorum_size,
    run_commit_round,
    sweep,
)
from paychain.ledger import KeyedHashScheme

SCHEME = KeyedHashScheme()


@pytest.mark.parametrize("n,expected", [(1, 1), (2, 2), (3, 3), (4, 3), (5, 4), (6, 5), (7, 5), (10, 7)])
def test_quorum_size_formula(n, expected):
    assert quorum_size(n) == (2 * n) // 3 + 1 == expected


def test_quorum_size_rejects_zero():
    with pytest.raises(ValueError):
        quorum_size(0)


def test_validator_set_counts_byzantine_members():
    validators = ValidatorSet.make(4, SCHEME, byzantine={0: Behavior.EQUIVOCATE, 2: Behavior.WITHHOLD})
    assert validators.n == 4
    assert validators.f == 2
    assert validators.quorum == 3


def test_schedule_identical_for_identical_seed():
    ids = [f"val-{i}" for i in range(4)]
    a = RoundSchedule.generate(ids, seed=11)
    b = RoundSchedule.generate(ids, seed=11)
    assert a == b
    assert a != RoundSchedule.generate(ids, seed=12)


def test_liveness_all_honest_no_drops():
    for seed in range(50):
        validators = ValidatorSet.make(4, SCHEME, seed=seed)
        schedule = RoundSchedule.generate(validators.ids(), seed=seed, drop_rate=0.0)
        outcome = run_commit_round(validators, [b"batch"], schedule)
        assert outcome.committed
        assert all(d is not None for d in outcome.per_node.values())
        assert len({d for d in outcome.per_node.values()}) == 1


def test_round_outcome_deterministic():
    validators = ValidatorSet.make(4, SCHEME, seed=5, byzantine={0: Behavior.EQUIVOCATE})
    schedule = RoundSchedule.generate(validators.ids(), seed=5)
    a = run_commit_round(validators, [b"x"], schedule)
    b = run_commit_round(validators, [b"x"], schedule)
    assert a == b


def test_committed_votes_verify_and_reach_quorum():
    validators = ValidatorSet.make(4, SCHEME, seed=2)
    schedule = RoundSchedule.generate(validators.ids(), seed=2, drop_rate=0.0)
    outcome = run_commit_round(validators, [b"entry"], schedule)
    assert outcome.committed and outcome.digest is not None
    assert len(outcome.votes) >= validators.quorum
    keys = validators.public_keys()
    for vote in outcome.votes:
        assert SCHEME.verify(keys[vote.validator_id], outcome.digest, vote.signature)


def test_empty_proposal_rejected():
    validators = ValidatorSet.make(3, SCHEME)
    schedule = RoundSchedule.generate(validators.ids(), seed=0)
    with pytest.raises(ValueError):
        run_commit_round(validators, [], schedule)


def test_safety_sweep_n4_f1_all_behaviors():
    result = sweep(4, 1, 200, SCHEME)
    assert result.total_runs == 200
    assert result.divergent_runs == 0
    assert result.consistent_runs == 200
    assert result.committed_runs > 0
    assert result.mean_rounds_to_commit is not None


def test_n3_f1_constructed_divergence():
    outcome = constructed_divergence(SCHEME)
    digests = list(outcome.per_node.values())
    committed = [d for d in digests if d is not None]
    assert len(set(committed)) >= 2  # two nodes committed conflicting blocks
    chains = [[d] if d is not None else [] for d in digests]
    assert not check_consistency(chains)


def test_n3_f1_safe_at_full_quorum():
    """With the safe floor(2n/3)+1 = 3 threshold the same adversary cannot split."""
    for seed in range(100):
        validators = ValidatorSet.make(3, SCHEME, seed=seed, byzantine={0: Behavior.EQUIVOCATE})
        schedule = RoundSchedule.generate(validators.ids(), seed=seed, proposer_index=0)
        outcome = run_commit_round(validators, [b"batch"], schedule)
        chains = [[d] if d is not None else [] for d in outcome.per_node.values()]
        assert check_consistency(chains)


def test_withholding_blocks_commit_when_quorum_needs_everyone():
    validators = ValidatorSet.make(3, SCHEME, seed=1, byzantine={1: Behavior.WITHHOLD})
    schedule = RoundSchedule.generate(validators.ids(), seed=1, drop_rate=0.0, proposer_index=0)
    outcome = run_commit_round(validators, [b"batch"], schedule)  # quorum_size(3) = 3
    assert not outcome.committed


def test_censor_delays_commit_but_cannot_forge():
    ids = [f"val-{i}" for i in range(4)]
    base = dict(
        delays={(a, b): 0 if a == b else 1 for a in ids for b in ids},
        drops={(a, b): False for a in ids for b in ids},
        shown_alt={v: False for v in ids},
    )
    # val-3's votes to everyone are dropped, so the censor's late vote gates commit
    for receiver in ids:
        if receiver != "val-3":
            base["drops"][("val-3", receiver)] = True

    honest = ValidatorSet.make(4, SCHEME, seed=3)
    fast = run_commit_round(honest, [b"batch"], RoundSchedule(seed=0, proposer_index=1, censor_delay=25, **base))
    censored_set = ValidatorSet.make(4, SCHEME, seed=3, byzantine={0: Behavior.CENSOR})
    slow = run_commit_round(censored_set, [b"batch"], RoundSchedule(seed=0, proposer_index=1, censor_delay=25, **base))

    assert fast.committed and slow.committed
    assert slow.commit_tick > fast.commit_tick  # censorship is measurable delay
    keys = censored_set.public_keys()
    for vote in slow.votes:  # ...but every committed vote still verifies
        assert SCHEME.verify(keys[vote.validator_id], slow.digest, vote.signature)


def test_check_consistency_prefix_rules():
    a, b, c = b"\x01" * 32, b"\x02" * 32, b"\x03" * 32
    assert check_consistency([[a, b], [a, b]])
    assert check_consistency([[a, b], [a, b, c]])
    assert not check_consistency([[a, b], [a, c]])
    with pytest.raises(ValueError):
        check_consistency([[a]])
