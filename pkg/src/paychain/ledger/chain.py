"""Append-only hash-chained block store with quorum-gated commits.

Every block embeds the SHA-256 of its serialized predecessor (the genesis
predecessor is the all-zero digest), a Merkle root over its entries, and
commit votes from the validator set. Committed state is held in a single
immutable snapshot reference, so an append either lands completely or not
at all; a crash injected anywhere on the append path leaves the previous
state intact.

Verification never raises on bad content: every defect is report content
with the first failing height and a failure kind.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from . import merkle
from .codec import DIGEST_SIZE, ZERO_DIGEST, DecodeError, Reader, Writer, sha256
from .signing import KeyRegistry, SignatureScheme


class LedgerError(Exception):
    """Base class for ledger append failures."""


class EmptyBatch(LedgerError):
    pass


class InsufficientQuorum(LedgerError):
    pass


class BadSignature(LedgerError):
    pass


class UnknownEntry(LedgerError):
    pass


class EntryKind(enum.IntEnum):
    ASSESSMENT_RECORDED = 1
    STATE_TRANSITION = 2
    APPROVAL_CAST = 3
    ATTESTATION_REGISTERED = 4


_ENTRY_SIGN_DOMAIN = b"paychain/entry/v1"
_HEADER_SIGN_DOMAIN = b"paychain/block-header/v1"


@dataclass(frozen=True)
class LedgerEntry:
    """One signed record; ``payload`` is the canonical bytes of a kind-specific record."""

    entry_id: int
    kind: EntryKind
    payload: bytes
    author: str
    timestamp_ms: int
    signature: bytes

    def signing_bytes(self) -> bytes:
        w = Writer()
        w.raw(_ENTRY_SIGN_DOMAIN)
        w.u64(self.entry_id)
        w.u8(int(self.kind))
        w.bytes_(self.payload)
        w.str_(self.author)
        w.u64(self.timestamp_ms)
        return w.getvalue()

    def encode(self) -> bytes:
        w = Writer()
        w.u64(self.entry_id)
        w.u8(int(self.kind))
        w.bytes_(self.payload)
        w.str_(self.author)
        w.u64(self.timestamp_ms)
        w.bytes_(self.signature)
        return w.getvalue()

    @classmethod
    def decode(cls, r: Reader) -> "LedgerEntry":
        entry_id = r.u64()
        kind_raw = r.u8()
        try:
            kind = EntryKind(kind_raw)
        except ValueError:
            raise DecodeError(f"unknown entry kind {kind_raw}") from None
        payload = r.bytes_()
        author = r.str_()
        timestamp_ms = r.u64()
        signature = r.bytes_()
        return cls(entry_id, kind, payload, author, timestamp_ms, signature)


def make_entry(
    *,
    entry_id: int,
    kind: EntryKind,
    payload: bytes,
    author: str,
    timestamp_ms: int,
    scheme: SignatureScheme,
    secret: bytes,
) -> LedgerEntry:
    unsigned = LedgerEntry(entry_id, kind, payload, author, timestamp_ms, b"")
    return LedgerEntry(entry_id, kind, payload, author, timestamp_ms, scheme.sign(secret, unsigned.signing_bytes()))


@dataclass(frozen=True)
class CommitVote:
    validator_id: str
    signature: bytes


def header_digest(height: int, prev_hash: bytes, merkle_root: bytes, block_time_ms: int) -> bytes:
    """The digest validators sign to commit a block."""
    w = Writer()
    w.raw(_HEADER_SIGN_DOMAIN)
    w.u64(height)
    w.digest(prev_hash)
    w.digest(merkle_root)
    w.u64(block_time_ms)
    return sha256(w.getvalue())


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    entries: tuple[LedgerEntry, ...]
    commit_votes: tuple[CommitVote, ...]
    block_time_ms: int

    def encode(self) -> bytes:
        w = Writer()
        w.u64(self.height)
        w.digest(self.prev_hash)
        w.digest(self.merkle_root)
        w.u32(len(self.entries))
        for entry in self.entries:
            w.raw(entry.encode())
        w.u32(len(self.commit_votes))
        for vote in self.commit_votes:
            w.str_(vote.validator_id)
            w.bytes_(vote.signature)
        w.u64(self.block_time_ms)
        return w.getvalue()

    @classmethod
    def decode(cls, r: Reader) -> "Block":
        height = r.u64()
        prev_hash = r.digest()
        merkle_root = r.digest()
        n_entries = r.u32()
        entries = tuple(LedgerEntry.decode(r) for _ in range(n_entries))
        n_votes = r.u32()
        votes = tuple(CommitVote(r.str_(), r.bytes_()) for _ in range(n_votes))
        block_time_ms = r.u64()
        return cls(height, prev_hash, merkle_root, entries, votes, block_time_ms)

    def block_hash(self) -> bytes:
        return sha256(self.encode())

    def header_digest(self) -> bytes:
        return header_digest(self.height, self.prev_hash, self.merkle_root, self.block_time_ms)

    def entry_leaves(self) -> list[bytes]:
        return [merkle.leaf_hash(e.encode()) for e in self.entries]


@dataclass(frozen=True)
class InclusionProof:
    leaf_index: int
    sibling_hashes: tuple[bytes, ...]
    block_height: int

    def to_json(self) -> dict:
        return {
            "leaf_index": self.leaf_index,
            "sibling_hashes": [h.hex() for h in self.sibling_hashes],
            "block_height": self.block_height,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "InclusionProof":
        return cls(
            leaf_index=int(obj["leaf_index"]),
            sibling_hashes=tuple(bytes.fromhex(h) for h in obj["sibling_hashes"]),
            block_height=int(obj["block_height"]),
        )


class FailureKind(enum.Enum):
    HASH_LINK_BREAK = "hash_link_break"
    MERKLE_MISMATCH = "merkle_mismatch"
    SIGNATURE_FAILURE = "signature_failure"
    QUORUM_SHORTFALL = "quorum_shortfall"
    # Extensions beyond the four core kinds: unparseable snapshot bytes and
    # chain-wide entry id gaps (a writer-contract breach, normally unreachable
    # because byte mutations trip the Merkle check first).
    DECODE_ERROR = "decode_error"
    SEQUENCE_BREAK = "sequence_break"


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    failure_height: int | None = None
    failure: FailureKind | None = None
    detail: str = ""
    blocks_checked: int = 0

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "failure_height": self.failure_height,
            "failure": self.failure.value if self.failure else None,
            "detail": self.detail,
            "blocks_checked": self.blocks_checked,
        }


@dataclass(frozen=True)
class _ChainState:
    blocks: tuple[Block, ...]
    entry_index: Mapping[int, tuple[int, int]]  # entry_id -> (height, leaf index)
    next_entry_id: int


class LedgerChain:
    """Single-writer chain; committed blocks are immutable and safely shared.

    ``validator_keys`` maps validator id to public key and ``quorum`` is the
    number of valid commit votes an append must carry. Both are trust
    anchors; they are conveyed inside snapshots for convenience but a real
    deployment would pin them out of band.
    """

    def __init__(
        self,
        *,
        scheme: SignatureScheme,
        validator_keys: Mapping[str, bytes],
        quorum: int,
        key_registry: KeyRegistry,
    ) -> None:
        if quorum < 1:
            raise ValueError("quorum must be at least 1")
        self.scheme = scheme
        self.validator_keys = dict(validator_keys)
        self.quorum = quorum
        self.key_registry = key_registry
        self._state = _ChainState(blocks=(), entry_index={}, next_entry_id=1)

    # -- read side ---------------------------------------------------------

    @property
    def height(self) -> int:
        return len(self._state.blocks)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return self._state.blocks

    @property
    def next_entry_id(self) -> int:
        return self._state.next_entry_id

    def head_hash(self) -> bytes:
        blocks = self._state.blocks
        return blocks[-1].block_hash() if blocks else ZERO_DIGEST

    def block_at(self, height: int) -> Block:
        if not 1 <= height <= self.height:
            raise IndexError(f"height {height} out of range 1..{self.height}")
        return self._state.blocks[height - 1]

    def entries(self) -> Iterable[LedgerEntry]:
        for block in self._state.blocks:
            yield from block.entries

    def get_entry(self, entry_id: int) -> LedgerEntry:
        loc = self._state.entry_index.get(entry_id)
        if loc is None:
            raise UnknownEntry(f"entry {entry_id} not on chain")
        height, leaf = loc
        return self._state.blocks[height - 1].entries[leaf]

    # -- append path -------------------------------------------------------

    def next_header_digest(self, entries: Sequence[LedgerEntry], block_time_ms: int) -> bytes:
        root = merkle.merkle_root([merkle.leaf_hash(e.encode()) for e in entries])
        return header_digest(self.height + 1, self.head_hash(), root, block_time_ms)

    def append_entries(
        self,
        entries: Sequence[LedgerEntry],
        votes: Sequence[CommitVote],
        block_time_ms: int,
        _pre_commit_hook: Callable[[], None] | None = None,
    ) -> Block:
        """Commit one batch atomically; all entries land in a single block."""
        if not entries:
            raise EmptyBatch("refusing to commit an empty entry batch")

        expected_id = self._state.next_entry_id
        for entry in entries:
            if entry.entry_id != expected_id:
                raise LedgerError(f"entry id {entry.entry_id} breaks the sequence, expected {expected_id}")
            expected_id += 1
            if not self.key_registry.verify(entry.author, entry.signing_bytes(), entry.signature):
                raise BadSignature(f"entry {entry.entry_id} signature does not verify for author {entry.author!r}")

        height = self.height + 1
        prev_hash = self.head_hash()
        root = merkle.merkle_root([merkle.leaf_hash(e.encode()) for e in entries])
        digest = header_digest(height, prev_hash, root, block_time_ms)

        seen: set[str] = set()
        valid = 0
        for vote in votes:
            if vote.validator_id in seen:
                continue
            seen.add(vote.validator_id)
            public = self.validator_keys.get(vote.validator_id)
            if public is None or not self.scheme.verify(public, digest, vote.signature):
                raise BadSignature(f"commit vote from {vote.validator_id!r} does not verify")
            valid += 1
        if valid < self.quorum:
            raise InsufficientQuorum(f"{valid} valid votes, quorum is {self.quorum}")

        block = Block(
            height=height,
            prev_hash=prev_hash,
            merkle_root=root,
            entries=tuple(entries),
            commit_votes=tuple(votes),
            block_time_ms=block_time_ms,
        )
        new_index = dict(self._state.entry_index)
        for leaf, entry in enumerate(entries):
            new_index[entry.entry_id] = (height, leaf)
        new_state = _ChainState(
            blocks=self._state.blocks + (block,),
            entry_index=new_index,
            next_entry_id=expected_id,
        )
        if _pre_commit_hook is not None:
            _pre_commit_hook()
        # Single reference assignment is the commit point.
        self._state = new_state
        return block

    # -- verification ------------------------------------------------------

    def verify_chain(self) -> VerificationReport:
        return verify_blocks(
            self._state.blocks,
            scheme=self.scheme,
            validator_keys=self.validator_keys,
            quorum=self.quorum,
            key_registry=self.key_registry,
        )

    def prove_inclusion(self, entry_id: int) -> InclusionProof:
        loc = self._state.entry_index.get(entry_id)
        if loc is None:
            raise UnknownEntry(f"entry {entry_id} not on chain")
        height, leaf = loc
        block = self._state.blocks[height - 1]
        path = merkle.inclusion_path(block.entry_leaves(), leaf)
        return InclusionProof(leaf_index=leaf, sibling_hashes=tuple(path), block_height=height)

    # -- snapshot support ----------------------------------------------------

    def load_unverified(self, blocks: Sequence[Block]) -> None:
        """Adopt decoded blocks as-is; callers verify separately.

        Snapshots may be attacker-supplied, so nothing here is trusted until
        ``verify_chain`` has run. Entry ids seen twice keep the first location
        so inclusion proofs stay stable under duplicate-id forgeries.
        """
        index: dict[int, tuple[int, int]] = {}
        next_id = 1
        for block in blocks:
            for leaf, entry in enumerate(block.entries):
                index.setdefault(entry.entry_id, (block.height, leaf))
                next_id = max(next_id, entry.entry_id + 1)
        self._state = _ChainState(blocks=tuple(blocks), entry_index=index, next_entry_id=next_id)


def verify_inclusion(root: bytes, proof: InclusionProof, entry: LedgerEntry) -> bool:
    leaf = merkle.leaf_hash(entry.encode())
    return merkle.root_from_path(leaf, proof.leaf_index, list(proof.sibling_hashes)) == root


def verify_blocks(
    blocks: Sequence[Block],
    *,
    scheme: SignatureScheme,
    validator_keys: Mapping[str, bytes],
    quorum: int,
    key_registry: KeyRegistry,
) -> VerificationReport:
    """Full re-verification of hash links, Merkle roots, signatures and quorum.

    An empty chain verifies clean. Failures are reported, never raised.
    """
    prev_hash = ZERO_DIGEST
    expected_entry_id = None
    for i, block in enumerate(blocks):
        height = i + 1

        if block.height != height or block.prev_hash != prev_hash:
            return VerificationReport(
                False, height, FailureKind.HASH_LINK_BREAK,
                f"block at position {height} links to {block.prev_hash.hex()[:16]}, expected {prev_hash.hex()[:16]}",
                blocks_checked=i,
            )

        recomputed = merkle.merkle_root(block.entry_leaves())
        if recomputed != block.merkle_root:
            return VerificationReport(
                False, height, FailureKind.MERKLE_MISMATCH,
                "stored Merkle root does not match the root recomputed from entries",
                blocks_checked=i,
            )

        for entry in block.entries:
            if expected_entry_id is not None and entry.entry_id != expected_entry_id:
                return VerificationReport(
                    False, height, FailureKind.SEQUENCE_BREAK,
                    f"entry id {entry.entry_id} breaks the chain-wide sequence",
                    blocks_checked=i,
                )
            expected_entry_id = entry.entry_id + 1
            if not key_registry.verify(entry.author, entry.signing_bytes(), entry.signature):
                return VerificationReport(
                    False, height, FailureKind.SIGNATURE_FAILURE,
                    f"entry {entry.entry_id} signature does not verify for author {entry.author!r}",
                    blocks_checked=i,
                )

        digest = block.header_digest()
        seen: set[str] = set()
        valid = 0
        for vote in block.commit_votes:
            if vote.validator_id in seen:
                continue
            seen.add(vote.validator_id)
            public = validator_keys.get(vote.validator_id)
            if public is None or not scheme.verify(public, digest, vote.signature):
                return VerificationReport(
                    False, height, FailureKind.SIGNATURE_FAILURE,
                    f"commit vote from {vote.validator_id!r} does not verify",
                    blocks_checked=i,
                )
            valid += 1
        if valid < quorum:
            return VerificationReport(
                False, height, FailureKind.QUORUM_SHORTFALL,
                f"{valid} valid votes, quorum is {quorum}",
                blocks_checked=i,
            )

        prev_hash = block.block_hash()

    return VerificationReport(True, blocks_checked=len(blocks))
