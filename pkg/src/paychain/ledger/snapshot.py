"""Ledger snapshot files and the byte-level tamper model.

A snapshot is the canonical binary chain (validator keys, actor key
directory, then the block sequence) plus a JSON-lines sidecar with one
human-readable object per block. Verifying a snapshot re-runs the full
chain verification against the embedded trust anchors; any unparseable
byte sequence is itself a verification failure, not an exception.

``tamper`` is the attacker: it returns a mutated copy of the serialized
chain and never touches the original. Deleting the chain tail is the one
mutation a hash chain cannot see on its own; detecting it requires an
external head receipt (see the audit harness).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .chain import Block, FailureKind, LedgerChain, VerificationReport, verify_blocks
from .codec import DecodeError, Reader, Writer
from .signing import KeyRegistry, scheme_by_name

_MAGIC = b"PAYCHN01"


class OutOfRange(ValueError):
    """Mutation targets an offset outside the serialized chain."""


@dataclass(frozen=True)
class MutationSpec:
    """One attacker edit: identity, a single-byte overwrite, or tail deletion."""

    kind: str = "identity"  # identity | set_byte | flip_byte | delete_last_block
    offset: int = 0
    value: int = 0


def encode_snapshot(chain: LedgerChain) -> bytes:
    w = Writer()
    w.raw(_MAGIC)
    w.str_(chain.scheme.name)
    validators = sorted(chain.validator_keys.items())
    w.u32(len(validators))
    for validator_id, public in validators:
        w.str_(validator_id)
        w.bytes_(public)
    actors = chain.key_registry.items()
    w.u32(len(actors))
    for actor_id, public in actors:
        w.str_(actor_id)
        w.bytes_(public)
    w.u64(len(chain.blocks))
    for block in chain.blocks:
        w.raw(block.encode())
    return w.getvalue()


def decode_snapshot(raw: bytes) -> LedgerChain:
    from ..consensus import quorum_size

    r = Reader(raw)
    if r.raw(len(_MAGIC)) != _MAGIC:
        raise DecodeError("bad snapshot magic")
    scheme = scheme_by_name(r.str_())
    n_validators = r.u32()
    validator_keys = {r.str_(): r.bytes_() for _ in range(n_validators)}
    if len(validator_keys) != n_validators:
        raise DecodeError("duplicate validator ids in snapshot")
    registry = KeyRegistry(scheme)
    n_actors = r.u32()
    for _ in range(n_actors):
        registry.register(r.str_(), r.bytes_())
    n_blocks = r.u64()
    blocks = [Block.decode(r) for _ in range(n_blocks)]
    r.expect_done()

    chain = LedgerChain(
        scheme=scheme,
        validator_keys=validator_keys,
        quorum=quorum_size(len(validator_keys)),
        key_registry=registry,
    )
    chain.load_unverified(blocks)
    return chain


def verify_snapshot_bytes(raw: bytes) -> VerificationReport:
    """Decode then fully verify; a decode failure is a reported failure."""
    try:
        chain = decode_snapshot(raw)
    except (DecodeError, ValueError) as exc:
        return VerificationReport(False, None, FailureKind.DECODE_ERROR, str(exc))
    return chain.verify_chain()


def save_snapshot(chain: LedgerChain, path: str | Path) -> Path:
    """Write ``path`` (binary) and ``path + .jsonl`` (sidecar); returns the binary path."""
    path = Path(path)
    path.write_bytes(encode_snapshot(chain))
    sidecar = path.with_name(path.name + ".jsonl")
    with sidecar.open("w", encoding="utf-8") as fh:
        for block in chain.blocks:
            fh.write(json.dumps(_sidecar_row(block), sort_keys=True) + "\n")
    return path


def load_snapshot(path: str | Path) -> LedgerChain:
    return decode_snapshot(Path(path).read_bytes())


def _sidecar_row(block: Block) -> dict:
    return {
        "height": block.height,
        "block_hash": block.block_hash().hex(),
        "prev_hash": block.prev_hash.hex(),
        "merkle_root": block.merkle_root.hex(),
        "entry_ids": [e.entry_id for e in block.entries],
        "n_votes": len(block.commit_votes),
        "block_time_ms": block.block_time_ms,
    }


def tamper(raw: bytes, spec: MutationSpec) -> bytes:
    """Return a mutated copy of the serialized chain (never in place)."""
    if spec.kind == "identity":
        return bytes(bytearray(raw))
    if spec.kind in ("set_byte", "flip_byte"):
        if not 0 <= spec.offset < len(raw):
            raise OutOfRange(f"offset {spec.offset} outside 0..{len(raw) - 1}")
        out = bytearray(raw)
        if spec.kind == "set_byte":
            out[spec.offset] = spec.value & 0xFF
        else:
            out[spec.offset] ^= 0xFF
        return bytes(out)
    if spec.kind == "delete_last_block":
        start, end, count_at = _last_block_span(raw)
        out = bytearray(raw[:start] + raw[end:])
        out[count_at : count_at + 8] = (count_at_value(raw, count_at) - 1).to_bytes(8, "big")
        return bytes(out)
    raise ValueError(f"unknown mutation kind {spec.kind!r}")


def count_at_value(raw: bytes, offset: int) -> int:
    return int.from_bytes(raw[offset : offset + 8], "big")


def block_spans(raw: bytes) -> list[tuple[int, int]]:
    """Byte span [start, end) of each block in a serialized snapshot."""
    r = Reader(raw)
    r.raw(len(_MAGIC))
    r.str_()
    for _ in range(r.u32()):
        r.str_()
        r.bytes_()
    for _ in range(r.u32()):
        r.str_()
        r.bytes_()
    n_blocks = r.u64()
    spans = []
    for _ in range(n_blocks):
        start = r.offset
        Block.decode(r)
        spans.append((start, r.offset))
    return spans


def _last_block_span(raw: bytes) -> tuple[int, int, int]:
    r = Reader(raw)
    r.raw(len(_MAGIC))
    r.str_()
    for _ in range(r.u32()):
        r.str_()
        r.bytes_()
    for _ in range(r.u32()):
        r.str_()
        r.bytes_()
    count_at = r.offset
    n_blocks = r.u64()
    if n_blocks == 0:
        raise OutOfRange("cannot delete a block from an empty chain")
    start = end = r.offset
    for _ in range(n_blocks):
        start = r.offset
        Block.decode(r)
        end = r.offset
    return start, end, count_at


def height_of_offset(raw: bytes, offset: int) -> int | None:
    """Block height containing a byte offset, or None for the header region."""
    for i, (start, end) in enumerate(block_spans(raw)):
        if start <= offset < end:
            return i + 1
    return None
