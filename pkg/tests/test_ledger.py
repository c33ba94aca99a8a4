"""Hash chain, quorum gating, inclusion proofs, snapshots and tampering."""

from __future__ import annotations

import numpy as np
import pytest

from paychain.consensus import QuorumSigner, ValidatorSet, quorum_size
from paychain.ledger import (
    BadSignature,
    EmptyBatch,
    EntryKind,
    FailureKind,
    InsufficientQuorum,
    KeyRegistry,
    KeyedHashScheme,
    Ed25519Scheme,
    LedgerChain,
    MutationSpec,
    OutOfRange,
    UnknownEntry,
    ZERO_DIGEST,
    encode_snapshot,
    height_of_offset,
    load_snapshot,
    make_entry,
    save_snapshot,
    tamper,
    verify_inclusion,
    verify_snapshot_bytes,
)

from _chain_utils import build_chain


def _single_entry(chain, author, scheme, payload=b"payload", timestamp=1_000):
    return make_entry(
        entry_id=chain.next_entry_id,
        kind=EntryKind.STATE_TRANSITION,
        payload=payload,
        author=author.key_id,
        timestamp_ms=timestamp,
        scheme=scheme,
        secret=author.secret,
    )


def _fresh_chain(n_validators=4, scheme=None, seed=0):
    scheme = scheme or KeyedHashScheme()
    validators = ValidatorSet.make(n_validators, scheme, seed=seed)
    registry = KeyRegistry(scheme)
    author = scheme.keypair("writer", b"\x00" * 8)
    registry.register("writer", author.public)
    chain = LedgerChain(
        scheme=scheme,
        validator_keys=validators.public_keys(),
        quorum=quorum_size(n_validators),
        key_registry=registry,
    )
    return chain, validators, author


def test_genesis_block_links_to_zero_digest():
    chain, validators, author = _fresh_chain()
    entry = _single_entry(chain, author, chain.scheme)
    digest = chain.next_header_digest([entry], 1_000)
    votes = QuorumSigner(validators).collect(digest)[:3]  # 3-of-4
    block = chain.append_entries([entry], votes, 1_000)
    assert block.height == 1
    assert block.prev_hash == ZERO_DIGEST
    assert chain.height == 1


def test_quorum_of_four_is_three_votes():
    chain, validators, author = _fresh_chain()
    entry = _single_entry(chain, author, chain.scheme)
    digest = chain.next_header_digest([entry], 1_000)
    votes = QuorumSigner(validators).collect(digest)
    with pytest.raises(InsufficientQuorum):
        chain.append_entries([entry], votes[:2], 1_000)
    assert chain.height == 0  # nothing committed by the failed attempt
    chain.append_entries([entry], votes[:3], 1_000)
    assert chain.height == 1


def test_empty_batch_rejected():
    chain, _, _ = _fresh_chain()
    with pytest.raises(EmptyBatch):
        chain.append_entries([], [], 1_000)


def test_bad_entry_signature_rejected():
    chain, validators, author = _fresh_chain()
    entry = _single_entry(chain, author, chain.scheme)
    forged = type(entry)(entry.entry_id, entry.kind, b"other-payload", entry.author,
                         entry.timestamp_ms, entry.signature)
    digest = chain.next_header_digest([forged], 1_000)
    with pytest.raises(BadSignature):
        chain.append_entries([forged], QuorumSigner(validators).collect(digest), 1_000)


def test_bad_vote_signature_rejected():
    chain, validators, author = _fresh_chain()
    entry = _single_entry(chain, author, chain.scheme)
    votes = QuorumSigner(validators).collect(b"some other digest")
    with pytest.raises(BadSignature):
        chain.append_entries([entry], votes, 1_000)


def test_batched_entries_share_one_block():
    chain, validators, author = _fresh_chain()
    entries = [
        make_entry(entry_id=1, kind=EntryKind.ASSESSMENT_RECORDED, payload=b"assessment",
                   author="writer", timestamp_ms=1_000, scheme=chain.scheme, secret=author.secret),
        make_entry(entry_id=2, kind=EntryKind.STATE_TRANSITION, payload=b"creation",
                   author="writer", timestamp_ms=1_000, scheme=chain.scheme, secret=author.secret),
    ]
    digest = chain.next_header_digest(entries, 1_000)
    block = chain.append_entries(entries, QuorumSigner(validators).collect(digest), 1_000)
    assert [e.entry_id for e in block.entries] == [1, 2]
    assert chain.height == 1


def test_append_is_atomic_under_crash_injection():
    chain, validators, author = _fresh_chain()
    entry = _single_entry(chain, author, chain.scheme)
    digest = chain.next_header_digest([entry], 1_000)
    votes = QuorumSigner(validators).collect(digest)

    with pytest.raises(RuntimeError):
        chain.append_entries([entry], votes, 1_000, _pre_commit_hook=lambda: (_ for _ in ()).throw(RuntimeError("crash")))
    # all or nothing: the failed append left no trace
    assert chain.height == 0
    assert chain.next_entry_id == 1
    with pytest.raises(UnknownEntry):
        chain.get_entry(1)
    chain.append_entries([entry], votes, 1_000)
    assert chain.height == 1


def test_deterministic_blocks_for_identical_inputs():
    a, *_ = build_chain(5, seed=9)
    b, *_ = build_chain(5, seed=9)
    assert encode_snapshot(a) == encode_snapshot(b)
    c, *_ = build_chain(5, seed=10)
    assert encode_snapshot(a) != encode_snapshot(c)


def test_verify_chain_clean_and_empty():
    chain, *_ = build_chain(10)
    report = chain.verify_chain()
    assert report.ok and report.blocks_checked == 10
    empty, _, _ = _fresh_chain()
    assert empty.verify_chain().ok


def test_inclusion_proofs_verify_for_every_entry():
    chain, *_ = build_chain(4, entries_per_block=4)
    for entry in chain.entries():
        proof = chain.prove_inclusion(entry.entry_id)
        root = chain.block_at(proof.block_height).merkle_root
        assert verify_inclusion(root, proof, entry)
        assert len(proof.sibling_hashes) == 2  # 4 entries -> ceil(log2(4))
        # and against the wrong root it fails
        other = chain.block_at(1 if proof.block_height != 1 else 2).merkle_root
        assert not verify_inclusion(other, proof, entry)


def test_prove_unknown_entry():
    chain, *_ = build_chain(2)
    with pytest.raises(UnknownEntry):
        chain.prove_inclusion(10_000)


def test_ed25519_scheme_plugs_in():
    scheme = Ed25519Scheme()
    chain, validators, author = _fresh_chain(scheme=scheme)
    entry = _single_entry(chain, author, scheme)
    digest = chain.next_header_digest([entry], 1_000)
    chain.append_entries([entry], QuorumSigner(validators).collect(digest), 1_000)
    assert chain.verify_chain().ok
    raw = encode_snapshot(chain)
    assert not verify_snapshot_bytes(tamper(raw, MutationSpec("flip_byte", offset=len(raw) - 10))).ok


# -- snapshots and the tamper model ------------------------------------------------


def test_snapshot_roundtrip(tmp_path):
    chain, *_ = build_chain(6)
    path = save_snapshot(chain, tmp_path / "ledger.snap")
    sidecar = tmp_path / "ledger.snap.jsonl"
    assert sidecar.exists()
    assert len(sidecar.read_text().splitlines()) == 6
    loaded = load_snapshot(path)
    assert loaded.height == 6
    assert loaded.verify_chain().ok
    assert encode_snapshot(loaded) == encode_snapshot(chain)


def test_identity_mutation_keeps_chain_clean():
    chain, *_ = build_chain(3)
    raw = encode_snapshot(chain)
    mutated = tamper(raw, MutationSpec("identity"))
    assert mutated == raw and mutated is not raw
    assert verify_snapshot_bytes(mutated).ok


def test_payload_overwrite_is_flagged():
    chain, *_ = build_chain(8)
    raw = encode_snapshot(chain)
    target = raw.find(b"block-4-entry-1")
    assert target > 0
    mutated = tamper(raw, MutationSpec("set_byte", offset=target, value=raw[target] ^ 0x41))
    report = verify_snapshot_bytes(mutated)
    assert not report.ok
    assert report.failure_height == 5
    assert report.failure in (FailureKind.MERKLE_MISMATCH, FailureKind.SIGNATURE_FAILURE)


def test_rehashed_forgery_breaks_the_next_link():
    """Replacing a block wholesale trips the successor's prev_hash check."""
    chain, validators, signer, author = build_chain(8)
    blocks = list(chain.blocks)
    victim = blocks[4]
    forged_entries = [
        make_entry(entry_id=e.entry_id, kind=e.kind, payload=e.payload + b"-forged",
                   author=e.author, timestamp_ms=e.timestamp_ms, scheme=chain.scheme,
                   secret=author.secret)
        for e in victim.entries
    ]
    from paychain.ledger.merkle import leaf_hash, merkle_root
    from paychain.ledger.chain import Block, header_digest
    from paychain.ledger import CommitVote

    root = merkle_root([leaf_hash(e.encode()) for e in forged_entries])
    digest = header_digest(victim.height, victim.prev_hash, root, victim.block_time_ms)
    forged = Block(
        height=victim.height,
        prev_hash=victim.prev_hash,
        merkle_root=root,
        entries=tuple(forged_entries),
        commit_votes=tuple(signer.collect(digest)),
        block_time_ms=victim.block_time_ms,
    )
    blocks[4] = forged
    tampered = LedgerChain(
        scheme=chain.scheme,
        validator_keys=chain.validator_keys,
        quorum=chain.quorum,
        key_registry=chain.key_registry,
    )
    tampered.load_unverified(blocks)
    report = tampered.verify_chain()
    assert not report.ok
    assert report.failure is FailureKind.HASH_LINK_BREAK
    assert report.failure_height == 6  # the forgery itself validates; its successor's link breaks


def test_single_byte_fuzz_small(rng):
    chain, *_ = build_chain(6)
    raw = encode_snapshot(chain)
    for _ in range(150):
        offset = int(rng.integers(0, len(raw)))
        new_value = int(rng.integers(0, 256))
        if new_value == raw[offset]:
            new_value = (new_value + 1) % 256
        report = verify_snapshot_bytes(tamper(raw, MutationSpec("set_byte", offset=offset, value=new_value)))
        assert not report.ok
        height = height_of_offset(raw, offset)
        if height is not None and report.failure is not FailureKind.DECODE_ERROR:
            assert report.failure_height is not None and report.failure_height <= height


def test_truncation_is_clean_without_an_external_head():
    """Deleting the tail is the one edit the chain alone cannot see."""
    chain, *_ = build_chain(5)
    raw = encode_snapshot(chain)
    truncated = tamper(raw, MutationSpec("delete_last_block"))
    report = verify_snapshot_bytes(truncated)
    assert report.ok
    from paychain.ledger import decode_snapshot

    assert decode_snapshot(truncated).height == 4


def test_tamper_out_of_range_offset():
    chain, *_ = build_chain(1)
    raw = encode_snapshot(chain)
    with pytest.raises(OutOfRange):
        tamper(raw, MutationSpec("flip_byte", offset=len(raw)))


def test_tamper_never_mutates_input():
    chain, *_ = build_chain(2)
    raw = encode_snapshot(chain)
    before = bytes(raw)
    tamper(raw, MutationSpec("flip_byte", offset=10))
    tamper(raw, MutationSpec("delete_last_block"))
    assert raw == before
