"""Tamper-evident append-only ledger: hash chain, Merkle proofs, snapshots."""

from .chain import (
    BadSignature,
    Block,
    CommitVote,
    EmptyBatch,
    EntryKind,
    FailureKind,
    InclusionProof,
    InsufficientQuorum,
    LedgerChain,
    LedgerEntry,
    LedgerError,
    UnknownEntry,
    VerificationReport,
    header_digest,
    make_entry,
    verify_blocks,
    verify_inclusion,
)
from .codec import DIGEST_SIZE, ZERO_DIGEST, DecodeError, Reader, Writer, sha256
from .signing import Ed25519Scheme, KeyedHashScheme, KeyPair, KeyRegistry, SignatureScheme, scheme_by_name
from .snapshot import (
    MutationSpec,
    OutOfRange,
    block_spans,
    decode_snapshot,
    encode_snapshot,
    height_of_offset,
    load_snapshot,
    save_snapshot,
    tamper,
    verify_snapshot_bytes,
)

__all__ = [
    "BadSignature",
    "Block",
    "CommitVote",
    "DecodeError",
    "DIGEST_SIZE",
    "Ed25519Scheme",
    "EmptyBatch",
    "EntryKind",
    "FailureKind",
    "InclusionProof",
    "InsufficientQuorum",
    "KeyPair",
    "KeyRegistry",
    "KeyedHashScheme",
    "LedgerChain",
    "LedgerEntry",
    "LedgerError",
    "MutationSpec",
    "OutOfRange",
    "Reader",
    "SignatureScheme",
    "UnknownEntry",
    "VerificationReport",
    "Writer",
    "ZERO_DIGEST",
    "block_spans",
    "decode_snapshot",
    "encode_snapshot",
    "header_digest",
    "height_of_offset",
    "load_snapshot",
    "make_entry",
    "save_snapshot",
    "scheme_by_name",
    "sha256",
    "tamper",
    "verify_blocks",
    "verify_inclusion",
    "verify_snapshot_bytes",
]
