"""Small chain-building helpers shared by ledger and acceptance tests."""

from __future__ import annotations

from paychain.consensus import QuorumSigner, ValidatorSet, quorum_size
from paychain.ledger import EntryKind, KeyRegistry, KeyedHashScheme, LedgerChain, make_entry


def build_chain(n_blocks: int, entries_per_block: int = 3, seed: int = 0):
    """A committed chain signed by one author under a 4-validator quorum."""
    scheme = KeyedHashScheme()
    validators = ValidatorSet.make(4, scheme, seed=seed)
    signer = QuorumSigner(validators)
    registry = KeyRegistry(scheme)
    author = scheme.keypair("writer", seed.to_bytes(8, "big", signed=True))
    registry.register("writer", author.public)
    chain = LedgerChain(
        scheme=scheme,
        validator_keys=validators.public_keys(),
        quorum=quorum_size(4),
        key_registry=registry,
    )
    for b in range(n_blocks):
        entries = [
            make_entry(
                entry_id=chain.next_entry_id + i,
                kind=EntryKind.STATE_TRANSITION,
                payload=f"block-{b}-entry-{i}-seed-{seed}".encode(),
                author="writer",
                timestamp_ms=1_000_000 + b * 1_000 + i,
                scheme=scheme,
                secret=author.secret,
            )
            for i in range(entries_per_block)
        ]
        block_time = 1_000_000 + b * 1_000
        digest = chain.next_header_digest(entries, block_time)
        chain.append_entries(entries, signer.collect(digest), block_time)
    return chain, validators, signer, author
