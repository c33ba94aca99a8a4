"""Canonical encoding and domain record round-trips."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from paychain.ledger.codec import DecodeError, Reader, Writer
from paychain.records import (
    ApprovalRecord,
    AssessmentRecord,
    AttestationRecord,
    PaymentRequest,
    TopFeature,
    TransitionRecord,
)


def test_writer_reader_roundtrip_fixed_fields():
    w = Writer()
    w.u8(7)
    w.u16(65_000)
    w.u32(4_000_000_000)
    w.u64(2**63)
    w.i64(-(2**62))
    w.bytes_(b"\x00\x01payload")
    w.str_("approver-ü")
    w.digest(b"\xab" * 32)
    r = Reader(w.getvalue())
    assert r.u8() == 7
    assert r.u16() == 65_000
    assert r.u32() == 4_000_000_000
    assert r.u64() == 2**63
    assert r.i64() == -(2**62)
    assert r.bytes_() == b"\x00\x01payload"
    assert r.str_() == "approver-ü"
    assert r.digest() == b"\xab" * 32
    r.expect_done()


def test_big_endian_layout_is_pinned():
    w = Writer()
    w.u64(1)
    assert w.getvalue() == b"\x00\x00\x00\x00\x00\x00\x00\x01"
    w2 = Writer()
    w2.bytes_(b"ab")
    assert w2.getvalue() == b"\x00\x00\x00\x02ab"


def test_truncated_input_raises_decode_error():
    w = Writer()
    w.bytes_(b"hello")
    raw = w.getvalue()
    with pytest.raises(DecodeError):
        Reader(raw[:-2]).bytes_()
    with pytest.raises(DecodeError):
        Reader(raw[:3]).u32()


def test_length_prefix_beyond_input_rejected():
    with pytest.raises(DecodeError):
        Reader(b"\xff\xff\xff\xff").bytes_()


def test_out_of_range_integers_rejected():
    w = Writer()
    with pytest.raises(ValueError):
        w.u8(256)
    with pytest.raises(ValueError):
        w.u16(-1)
    with pytest.raises(ValueError):
        w.i64(2**63)


@given(st.binary(max_size=200), st.text(max_size=50), st.integers(min_value=0, max_value=2**64 - 1))
def test_roundtrip_property(blob, text, number):
    w = Writer()
    w.bytes_(blob)
    w.str_(text)
    w.u64(number)
    r = Reader(w.getvalue())
    assert r.bytes_() == blob
    assert r.str_() == text
    assert r.u64() == number
    r.expect_done()


def _assessment() -> AssessmentRecord:
    return AssessmentRecord(
        payment_id="PAY-000042",
        model_hash=b"\x11" * 32,
        score_bps=8_500,
        top_features=tuple(TopFeature(i, (-1) ** i * (500_000 - i * 1000)) for i in range(5)),
        base_value_micro=-2_345_678,
        background_ref=b"\x22" * 32,
        signatures=(("inference-0", b"\x33" * 32), ("inference-1", b"\x44" * 32)),
    )


def test_assessment_record_roundtrip():
    record = _assessment()
    assert AssessmentRecord.decode(record.encode()) == record


def test_assessment_signing_bytes_exclude_background_and_signatures():
    record = _assessment()
    moved = AssessmentRecord(
        payment_id=record.payment_id,
        model_hash=record.model_hash,
        score_bps=record.score_bps,
        top_features=record.top_features,
        base_value_micro=record.base_value_micro,
        background_ref=b"\x99" * 32,
        signatures=(),
    )
    # the signature covers (payment, model, score, features, base) only
    assert record.signing_bytes() == moved.signing_bytes()


def test_transition_record_roundtrip_with_and_without_request():
    request = PaymentRequest("PAY-1", "alice", "V-9", 123_456, "OPS-1", 1_000)
    create = TransitionRecord("PAY-1", 1, 0, 1, "alice", "requester", 371_000, 1_000, request=request)
    plain = TransitionRecord("PAY-1", 2, 1, 2, "mia", "manager", 90_000, 2_000, reason="")
    assert TransitionRecord.decode(create.encode()) == create
    assert TransitionRecord.decode(plain.encode()) == plain


def test_approval_and_attestation_roundtrip():
    approval = ApprovalRecord("PAY-1", 2, "mia", "manager", True, 5_000)
    assert ApprovalRecord.decode(approval.encode()) == approval
    attestation = AttestationRecord(b"\x55" * 32, "inference-0", b"\x66" * 32, 2, "admin", 9_000)
    assert AttestationRecord.decode(attestation.encode()) == attestation


def test_payment_request_rejects_non_positive_amount():
    with pytest.raises(ValueError):
        PaymentRequest("PAY-1", "alice", "V-1", 0, "OPS-1", 0)
