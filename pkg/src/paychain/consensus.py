"""Seeded consortium quorum-commit simulation with Byzantine fault injection.

One-shot vote collection stands in for full BFT phases: a proposer shows a
batch, validators sign its header digest, and every node independently
commits once it observes enough distinct valid votes. The safe commit
threshold is ``quorum_size(n) = floor(2n/3) + 1``; with fewer than n/3
Byzantine validators no pair of honest nodes can commit conflicting blocks
at the same height, because two such quorums would have to share an honest
double-signer.

The simulator also lets a scenario lower the per-node commit threshold to
the liveness-first ``n - f`` that misconfigured deployments use. At n=3,
f=1 that threshold is 2, and a single equivocator splits the honest nodes,
which is exactly the boundary the f < n/3 rule exists to prevent.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .ledger.chain import CommitVote, header_digest
from .ledger.codec import ZERO_DIGEST
from .ledger.merkle import leaf_hash, merkle_root
from .ledger.signing import KeyPair, SignatureScheme


def quorum_size(n: int) -> int:
    """Commit votes required for a block to be final: floor(2n/3) + 1."""
    if n < 1:
        raise ValueError("validator count must be at least 1")
    return (2 * n) // 3 + 1


class Behavior(enum.Enum):
    HONEST = "honest"
    EQUIVOCATE = "equivocate"
    WITHHOLD = "withhold"
    CENSOR = "censor"


@dataclass(frozen=True)
class Validator:
    validator_id: str
    keypair: KeyPair
    behavior: Behavior


@dataclass(frozen=True)
class ValidatorSet:
    members: tuple[Validator, ...]
    scheme: SignatureScheme

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def f(self) -> int:
        return sum(1 for m in self.members if m.behavior is not Behavior.HONEST)

    @property
    def quorum(self) -> int:
        return quorum_size(self.n)

    def public_keys(self) -> dict[str, bytes]:
        return {m.validator_id: m.keypair.public for m in self.members}

    def ids(self) -> list[str]:
        return [m.validator_id for m in self.members]

    @classmethod
    def make(
        cls,
        n: int,
        scheme: SignatureScheme,
        *,
        seed: int = 0,
        byzantine: Mapping[int, Behavior] | None = None,
    ) -> "ValidatorSet":
        members = []
        for i in range(n):
            behavior = (byzantine or {}).get(i, Behavior.HONEST)
            kp = scheme.keypair(f"val-{i}", seed.to_bytes(8, "big"))
            members.append(Validator(f"val-{i}", kp, behavior))
        return cls(tuple(members), scheme)


class QuorumSigner:
    """Honest commit-vote provider used by the ledger's single writer."""

    def __init__(self, validators: ValidatorSet) -> None:
        self.validators = validators

    def collect(self, digest: bytes) -> list[CommitVote]:
        votes = []
        for member in self.validators.members:
            if member.behavior is Behavior.HONEST:
                votes.append(CommitVote(member.validator_id, self.validators.scheme.sign(member.keypair.secret, digest)))
        return votes


@dataclass(frozen=True)
class RoundSchedule:
    """Deterministic message fate for one round; identical seed, identical schedule."""

    seed: int
    proposer_index: int
    delays: Mapping[tuple[str, str], int]
    drops: Mapping[tuple[str, str], bool]
    shown_alt: Mapping[str, bool]  # which validators an equivocating proposer shows the alt batch
    censor_delay: int = 25

    @classmethod
    def generate(
        cls,
        validator_ids: Sequence[str],
        seed: int,
        *,
        drop_rate: float = 0.15,
        max_delay: int = 3,
        censor_delay: int = 25,
        proposer_index: int | None = None,
    ) -> "RoundSchedule":
        rng = random.Random(seed)
        delays: dict[tuple[str, str], int] = {}
        drops: dict[tuple[str, str], bool] = {}
        for sender in validator_ids:
            for receiver in validator_ids:
                if sender == receiver:
                    delays[(sender, receiver)] = 0
                    drops[(sender, receiver)] = False
                else:
                    delays[(sender, receiver)] = rng.randint(1, max_delay)
                    drops[(sender, receiver)] = rng.random() < drop_rate
        shown_alt = {v: rng.random() < 0.5 for v in validator_ids}
        if proposer_index is None:
            proposer_index = rng.randrange(len(validator_ids))
        return cls(seed, proposer_index, delays, drops, shown_alt, censor_delay)


@dataclass(frozen=True)
class CommitOutcome:
    committed: bool
    digest: bytes | None
    votes: tuple[CommitVote, ...]
    per_node: Mapping[str, bytes | None]
    commit_tick: int | None

    @property
    def rounds_to_commit(self) -> int | None:
        return self.commit_tick


@dataclass
class _PendingVote:
    sender: str
    digest: bytes
    signature: bytes
    cast_delay: int  # ticks before the vote even leaves the sender


def proposal_digest(proposal: Sequence[bytes], *, height: int, prev_hash: bytes, block_time_ms: int) -> bytes:
    root = merkle_root([leaf_hash(item) for item in proposal])
    return header_digest(height, prev_hash, root, block_time_ms)


def run_commit_round(
    validators: ValidatorSet,
    proposal: Sequence[bytes],
    schedule: RoundSchedule,
    *,
    height: int = 1,
    prev_hash: bytes = ZERO_DIGEST,
    block_time_ms: int = 0,
    commit_quorum: int | None = None,
    horizon: int = 100,
) -> CommitOutcome:
    """One quorum-commit round under the given message schedule.

    ``commit_quorum`` defaults to the safe ``quorum_size(n)``. Honest
    validators sign at most one digest in the round; equivocators sign both
    the primary and (when they propose) an alternate batch; withholders stay
    silent; censors sign late by ``schedule.censor_delay`` ticks, modeling
    delay rather than forgery.
    """
    if not proposal:
        raise ValueError("proposal must be non-empty")
    members = validators.members
    quorum = commit_quorum if commit_quorum is not None else validators.quorum
    scheme = validators.scheme

    proposer = members[schedule.proposer_index % len(members)]
    primary = proposal_digest(proposal, height=height, prev_hash=prev_hash, block_time_ms=block_time_ms)
    alt: bytes | None = None
    if proposer.behavior is Behavior.EQUIVOCATE:
        alt_batch = list(proposal) + [b"paychain/equivocation"]
        alt = proposal_digest(alt_batch, height=height, prev_hash=prev_hash, block_time_ms=block_time_ms)

    # Which digest each validator is shown by the proposer.
    shown: dict[str, bytes] = {}
    for member in members:
        if alt is not None and schedule.shown_alt.get(member.validator_id, False) and member is not proposer:
            shown[member.validator_id] = alt
        else:
            shown[member.validator_id] = primary

    votes_cast: list[_PendingVote] = []
    for member in members:
        if member.behavior is Behavior.WITHHOLD:
            continue
        if member.behavior is Behavior.EQUIVOCATE:
            targets = [primary] if alt is None else [primary, alt]
            for digest in targets:
                votes_cast.append(_PendingVote(member.validator_id, digest, scheme.sign(member.keypair.secret, digest), 0))
            continue
        digest = shown[member.validator_id]
        cast_delay = schedule.censor_delay if member.behavior is Behavior.CENSOR else 0
        votes_cast.append(_PendingVote(member.validator_id, digest, scheme.sign(member.keypair.secret, digest), cast_delay))

    # Per-node observation: each node sees each vote at cast_delay + link delay
    # unless the link drops it; a node always sees its own votes immediately.
    per_node: dict[str, bytes | None] = {}
    commit_ticks: dict[str, int] = {}
    for receiver in members:
        arrivals: list[tuple[int, _PendingVote]] = []
        for vote in votes_cast:
            key = (vote.sender, receiver.validator_id)
            if schedule.drops.get(key, False):
                continue
            tick = vote.cast_delay + schedule.delays.get(key, 1)
            if tick <= horizon:
                arrivals.append((tick, vote))
        arrivals.sort(key=lambda item: (item[0], item[1].sender, item[1].digest))
        seen: dict[bytes, set[str]] = {}
        decided: bytes | None = None
        for tick, vote in arrivals:
            voters = seen.setdefault(vote.digest, set())
            voters.add(vote.sender)
            if len(voters) >= quorum:
                decided = vote.digest
                commit_ticks[receiver.validator_id] = tick
                break
        per_node[receiver.validator_id] = decided

    writer_digest = per_node[proposer.validator_id]
    if writer_digest is None:
        return CommitOutcome(False, None, (), per_node, None)
    # Assemble the writer's quorum certificate from votes it can observe.
    qc = []
    seen_ids: set[str] = set()
    for vote in votes_cast:
        key = (vote.sender, proposer.validator_id)
        if vote.digest == writer_digest and not schedule.drops.get(key, False) and vote.sender not in seen_ids:
            seen_ids.add(vote.sender)
            qc.append(CommitVote(vote.sender, vote.signature))
    return CommitOutcome(True, writer_digest, tuple(qc), per_node, commit_ticks.get(proposer.validator_id))


def check_consistency(nodes: Sequence[Sequence[bytes]]) -> bool:
    """True iff every pair of per-node chains is prefix-consistent."""
    if len(nodes) < 2:
        raise ValueError("need at least 2 node chains to compare")
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            a, b = nodes[i], nodes[j]
            shorter = min(len(a), len(b))
            if list(a[:shorter]) != list(b[:shorter]):
                return False
    return True


_BEHAVIOR_CYCLE = (Behavior.EQUIVOCATE, Behavior.WITHHOLD, Behavior.CENSOR)


@dataclass
class SweepResult:
    consistent_runs: int = 0
    divergent_runs: int = 0
    committed_runs: int = 0
    total_runs: int = 0
    _tick_sum: int = 0

    @property
    def mean_rounds_to_commit(self) -> float | None:
        if self.committed_runs == 0:
            return None
        return self._tick_sum / self.committed_runs

    def to_json(self) -> dict:
        return {
            "consistent_runs": self.consistent_runs,
            "divergent_runs": self.divergent_runs,
            "committed_runs": self.committed_runs,
            "total_runs": self.total_runs,
            "mean_rounds_to_commit": self.mean_rounds_to_commit,
        }


def sweep(
    n: int,
    f: int,
    seeds: int,
    scheme: SignatureScheme,
    *,
    behavior: Behavior | None = None,
    commit_quorum: int | None = None,
    drop_rate: float = 0.15,
    seed_offset: int = 0,
) -> SweepResult:
    """Run one commit round per seed and tally per-node prefix consistency.

    With ``behavior=None`` the Byzantine behavior cycles per seed so a sweep
    covers equivocation, withholding and censoring. Byzantine members are
    placed at the lowest indices and the proposer cycles over all members so
    Byzantine proposers occur regularly.
    """
    if f >= n:
        raise ValueError("f must be smaller than n")
    result = SweepResult()
    payload = [b"batch-entry-1", b"batch-entry-2"]
    for s in range(seed_offset, seed_offset + seeds):
        chosen = behavior or _BEHAVIOR_CYCLE[s % len(_BEHAVIOR_CYCLE)]
        byzantine = {i: chosen for i in range(f)}
        validators = ValidatorSet.make(n, scheme, seed=s, byzantine=byzantine)
        schedule = RoundSchedule.generate(
            validators.ids(), seed=s, drop_rate=drop_rate, proposer_index=s % n
        )
        outcome = run_commit_round(validators, payload, schedule, commit_quorum=commit_quorum)
        chains = [
            [digest] if digest is not None else []
            for digest in (outcome.per_node[v] for v in validators.ids())
        ]
        if check_consistency(chains):
            result.consistent_runs += 1
        else:
            result.divergent_runs += 1
        if outcome.committed and outcome.commit_tick is not None:
            result.committed_runs += 1
            result._tick_sum += outcome.commit_tick
        result.total_runs += 1
    return result


def constructed_divergence(scheme: SignatureScheme, *, seed: int = 0) -> CommitOutcome:
    """The f >= n/3 boundary made concrete: n=3 with one equivocating proposer.

    The deployment-style liveness threshold n - f = 2 is below the safe
    quorum_size(3) = 3, the drop matrix isolates the two honest nodes, and
    the equivocator hands each of them a different batch. Both honest nodes
    commit, on conflicting digests.
    """
    validators = ValidatorSet.make(3, scheme, seed=seed, byzantine={0: Behavior.EQUIVOCATE})
    ids = validators.ids()
    byz, h1, h2 = ids
    delays = {(a, b): 0 if a == b else 1 for a in ids for b in ids}
    drops = {(a, b): False for a in ids for b in ids}
    drops[(h1, h2)] = True
    drops[(h2, h1)] = True
    drops[(byz, h2)] = False  # equivocator's alt vote still reaches h2
    schedule = RoundSchedule(
        seed=seed,
        proposer_index=0,
        delays=delays,
        drops=drops,
        shown_alt={byz: False, h1: False, h2: True},
    )
    return run_commit_round(
        validators,
        [b"double-spend-batch"],
        schedule,
        commit_quorum=validators.n - validators.f,
    )


def sweep_summary_json(result: SweepResult) -> str:
    return json.dumps(result.to_json(), indent=2, sort_keys=True)
