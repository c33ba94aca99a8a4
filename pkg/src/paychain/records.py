"""Kind-specific ledger entry payloads and their canonical codecs.

Each record round-trips through the canonical binary encoding (encode then
decode is the identity), and each has a JSON projection for reports and
sidecars. Scores and attribution values are fixed-point integers: fraud
probability in basis points, contributions and base value in micro-units,
because the contract layer has no real numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .ledger.codec import Reader, Writer


@dataclass(frozen=True)
class TopFeature:
    feature_id: int
    contribution_micro: int


@dataclass(frozen=True)
class AssessmentRecord:
    """On-chain fraud assessment: model commitment, score, top-5 attribution."""

    payment_id: str
    model_hash: bytes
    score_bps: int
    top_features: tuple[TopFeature, ...]
    base_value_micro: int
    background_ref: bytes
    signatures: tuple[tuple[str, bytes], ...]  # (inference key id, signature)

    def signing_bytes(self) -> bytes:
        """What an inference key signs: payment, model, score, features, base."""
        w = Writer()
        w.raw(b"paychain/assessment/v1")
        w.str_(self.payment_id)
        w.digest(self.model_hash)
        w.u16(self.score_bps)
        w.u8(len(self.top_features))
        for feat in self.top_features:
            w.u32(feat.feature_id)
            w.i64(feat.contribution_micro)
        w.i64(self.base_value_micro)
        return w.getvalue()

    def encode(self) -> bytes:
        w = Writer()
        w.str_(self.payment_id)
        w.digest(self.model_hash)
        w.u16(self.score_bps)
        w.u8(len(self.top_features))
        for feat in self.top_features:
            w.u32(feat.feature_id)
            w.i64(feat.contribution_micro)
        w.i64(self.base_value_micro)
        w.digest(self.background_ref)
        w.u16(len(self.signatures))
        for key_id, sig in self.signatures:
            w.str_(key_id)
            w.bytes_(sig)
        return w.getvalue()

    @classmethod
    def decode(cls, payload: bytes) -> "AssessmentRecord":
        r = Reader(payload)
        payment_id = r.str_()
        model_hash = r.digest()
        score_bps = r.u16()
        feats = tuple(TopFeature(r.u32(), r.i64()) for _ in range(r.u8()))
        base = r.i64()
        background_ref = r.digest()
        sigs = tuple((r.str_(), r.bytes_()) for _ in range(r.u16()))
        r.expect_done()
        return cls(payment_id, model_hash, score_bps, feats, base, background_ref, sigs)

    def to_json(self) -> dict:
        return {
            "payment_id": self.payment_id,
            "model_hash": self.model_hash.hex(),
            "score_bps": self.score_bps,
            "top_features": [
                {"feature_id": f.feature_id, "contribution_micro": f.contribution_micro}
                for f in self.top_features
            ],
            "base_value_micro": self.base_value_micro,
            "background_ref": self.background_ref.hex(),
            "signed_by": [key_id for key_id, _ in self.signatures],
        }


@dataclass(frozen=True)
class PaymentRequest:
    payment_id: str
    requester: str
    vendor: str
    amount_cents: int
    budget_line: str
    submitted_at_ms: int

    def __post_init__(self) -> None:
        if self.amount_cents <= 0:
            raise ValueError("payment amount must be positive")


@dataclass(frozen=True)
class TransitionRecord:
    """One workflow state change; creation transitions embed the request."""

    payment_id: str
    action: int
    from_state: int
    to_state: int
    actor: str
    role: str
    gas: int
    timestamp_ms: int
    reason: str = ""
    request: PaymentRequest | None = None

    def encode(self) -> bytes:
        w = Writer()
        w.str_(self.payment_id)
        w.u8(self.action)
        w.u8(self.from_state)
        w.u8(self.to_state)
        w.str_(self.actor)
        w.str_(self.role)
        w.u64(self.gas)
        w.u64(self.timestamp_ms)
        w.str_(self.reason)
        if self.request is None:
            w.u8(0)
        else:
            w.u8(1)
            w.str_(self.request.requester)
            w.str_(self.request.vendor)
            w.u64(self.request.amount_cents)
            w.str_(self.request.budget_line)
            w.u64(self.request.submitted_at_ms)
        return w.getvalue()

    @classmethod
    def decode(cls, payload: bytes) -> "TransitionRecord":
        r = Reader(payload)
        payment_id = r.str_()
        action = r.u8()
        from_state = r.u8()
        to_state = r.u8()
        actor = r.str_()
        role = r.str_()
        gas = r.u64()
        timestamp_ms = r.u64()
        reason = r.str_()
        request = None
        if r.u8() == 1:
            request = PaymentRequest(
                payment_id=payment_id,
                requester=r.str_(),
                vendor=r.str_(),
                amount_cents=r.u64(),
                budget_line=r.str_(),
                submitted_at_ms=r.u64(),
            )
        r.expect_done()
        return cls(payment_id, action, from_state, to_state, actor, role, gas, timestamp_ms, reason, request)

    def to_json(self) -> dict:
        out = {
            "payment_id": self.payment_id,
            "action": self.action,
            "from_state": self.from_state,
            "to_state": self.to_state,
            "actor": self.actor,
            "role": self.role,
            "gas": self.gas,
            "timestamp_ms": self.timestamp_ms,
            "reason": self.reason,
        }
        if self.request is not None:
            out["request"] = {
                "requester": self.request.requester,
                "vendor": self.request.vendor,
                "amount_cents": self.request.amount_cents,
                "budget_line": self.request.budget_line,
                "submitted_at_ms": self.request.submitted_at_ms,
            }
        return out


@dataclass(frozen=True)
class ApprovalRecord:
    """Approval vote decoupled from a state change.

    Reserved for multi-approver stages where a single vote does not move the
    state machine; the current single-approver stages record their votes in
    the transition itself.
    """

    payment_id: str
    action: int
    actor: str
    role: str
    approve: bool
    timestamp_ms: int

    def encode(self) -> bytes:
        w = Writer()
        w.str_(self.payment_id)
        w.u8(self.action)
        w.str_(self.actor)
        w.str_(self.role)
        w.u8(1 if self.approve else 0)
        w.u64(self.timestamp_ms)
        return w.getvalue()

    @classmethod
    def decode(cls, payload: bytes) -> "ApprovalRecord":
        r = Reader(payload)
        rec = cls(r.str_(), r.u8(), r.str_(), r.str_(), r.u8() == 1, r.u64())
        r.expect_done()
        return rec


@dataclass(frozen=True)
class AttestationRecord:
    """Model-hash commitment plus one authorized inference key."""

    model_hash: bytes
    key_id: str
    public_key: bytes
    score_quorum: int  # matching signed scores required to accept an assessment
    registered_by: str
    timestamp_ms: int

    def encode(self) -> bytes:
        w = Writer()
        w.digest(self.model_hash)
        w.str_(self.key_id)
        w.bytes_(self.public_key)
        w.u16(self.score_quorum)
        w.str_(self.registered_by)
        w.u64(self.timestamp_ms)
        return w.getvalue()

    @classmethod
    def decode(cls, payload: bytes) -> "AttestationRecord":
        r = Reader(payload)
        rec = cls(r.digest(), r.str_(), r.bytes_(), r.u16(), r.str_(), r.u64())
        r.expect_done()
        return rec

    def to_json(self) -> dict:
        return {
            "model_hash": self.model_hash.hex(),
            "key_id": self.key_id,
            "score_quorum": self.score_quorum,
            "registered_by": self.registered_by,
            "timestamp_ms": self.timestamp_ms,
        }
