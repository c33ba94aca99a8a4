"""Binary hash tree over a block's entries.

Leaves are zero-padded to the next power of two so every inclusion proof
for an n-entry block has exactly ceil(log2(n)) siblings (0 for a single
entry). Leaf and interior hashes are domain-separated to rule out
second-preimage games between the two levels.
"""

from __future__ import annotations

from .codec import ZERO_DIGEST, sha256

_LEAF_PREFIX = b"\x00"
_NODE_PREFIX = b"\x01"


def leaf_hash(data: bytes) -> bytes:
    return sha256(_LEAF_PREFIX + data)


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(_NODE_PREFIX + left + right)


def _padded(leaves: list[bytes]) -> list[bytes]:
    width = 1
    while width < len(leaves):
        width *= 2
    return leaves + [ZERO_DIGEST] * (width - len(leaves))


def merkle_root(leaves: list[bytes]) -> bytes:
    """Root over leaf hashes; the empty tree roots to the zero digest."""
    if not leaves:
        return ZERO_DIGEST
    level = _padded(list(leaves))
    while len(level) > 1:
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def inclusion_path(leaves: list[bytes], index: int) -> list[bytes]:
    """Sibling hashes from the leaf up to (excluding) the root."""
    if not 0 <= index < len(leaves):
        raise IndexError(f"leaf index {index} out of range for {len(leaves)} leaves")
    level = _padded(list(leaves))
    path: list[bytes] = []
    pos = index
    while len(level) > 1:
        sibling = pos ^ 1
        path.append(level[sibling])
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        pos //= 2
    return path


def root_from_path(leaf: bytes, index: int, siblings: list[bytes]) -> bytes:
    """Recompute the root implied by a leaf hash and its sibling path."""
    digest = leaf
    pos = index
    for sibling in siblings:
        if pos % 2 == 0:
            digest = node_hash(digest, sibling)
        else:
            digest = node_hash(sibling, digest)
        pos //= 2
    return digest
