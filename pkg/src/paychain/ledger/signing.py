"""Pluggable signing for ledger entries and commit votes.

The default scheme is a deterministic keyed-hash stand-in (HMAC-SHA256
where the verification key equals the signing key). It exercises the same
sign/verify contract as a real signature without key infrastructure, which
is all the simulation needs: the tamper model mutates bytes, it never
re-signs. Unforgeability against a key-holding adversary is explicitly an
assumption, not a property of the stand-in. For real asymmetric signatures
plug in :class:`Ed25519Scheme`.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field

from .codec import sha256


@dataclass(frozen=True)
class KeyPair:
    key_id: str
    secret: bytes
    public: bytes


class SignatureScheme:
    """Interface every scheme implements."""

    name: str = "abstract"

    def keypair(self, key_id: str, seed: bytes) -> KeyPair:
        raise NotImplementedError

    def sign(self, secret: bytes, message: bytes) -> bytes:
        raise NotImplementedError

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        raise NotImplementedError


class KeyedHashScheme(SignatureScheme):
    """HMAC-SHA256 stand-in; public key == secret key by design."""

    name = "keyed-hash"

    def keypair(self, key_id: str, seed: bytes) -> KeyPair:
        secret = sha256(b"paychain/keygen/" + seed + b"/" + key_id.encode("utf-8"))
        return KeyPair(key_id=key_id, secret=secret, public=secret)

    def sign(self, secret: bytes, message: bytes) -> bytes:
        return hmac.new(secret, message, hashlib.sha256).digest()

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        expected = hmac.new(public, message, hashlib.sha256).digest()
        return hmac.compare_digest(expected, signature)


class Ed25519Scheme(SignatureScheme):
    """Real asymmetric signatures via the cryptography package."""

    name = "ed25519"

    def keypair(self, key_id: str, seed: bytes) -> KeyPair:
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        secret = sha256(b"paychain/keygen/" + seed + b"/" + key_id.encode("utf-8"))
        private = Ed25519PrivateKey.from_private_bytes(secret)
        public = private.public_key().public_bytes_raw()
        return KeyPair(key_id=key_id, secret=secret, public=public)

    def sign(self, secret: bytes, message: bytes) -> bytes:
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        return Ed25519PrivateKey.from_private_bytes(secret).sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

        try:
            Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False


_SCHEMES = {
    KeyedHashScheme.name: KeyedHashScheme,
    Ed25519Scheme.name: Ed25519Scheme,
}


def scheme_by_name(name: str) -> SignatureScheme:
    try:
        return _SCHEMES[name]()
    except KeyError:
        raise ValueError(f"unknown signature scheme {name!r}") from None


@dataclass
class KeyRegistry:
    """Directory of actor public keys, the verify side of the trust anchor."""

    scheme: SignatureScheme
    _public: dict[str, bytes] = field(default_factory=dict)

    def register(self, key_id: str, public: bytes) -> None:
        self._public[key_id] = public

    def public_key(self, key_id: str) -> bytes | None:
        return self._public.get(key_id)

    def verify(self, key_id: str, message: bytes, signature: bytes) -> bool:
        public = self._public.get(key_id)
        if public is None:
            return False
        return self.scheme.verify(public, message, signature)

    def known_ids(self) -> list[str]:
        return sorted(self._public)

    def items(self) -> list[tuple[str, bytes]]:
        return sorted(self._public.items())
