"""Peer identities, Ed25519 signatures and SHA-256 digests.

A peer's network identifier is the raw 32-byte Ed25519 public key.
"""
from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass, field
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

KEY_SIZE = 32
SIGNATURE_SIZE = 64
DIGEST_SIZE = 32


@dataclass(frozen=True)
class PeerIdentity:
    """Ed25519 key pair. ``public_key`` doubles as the peer id."""

    private_key: bytes = field(repr=False)
    public_key: bytes

    def sign(self, payload: bytes) -> bytes:
        return sign(payload, self.private_key)

    @property
    def short(self) -> str:
        return self.public_key.hex()[:8]


def generate_identity(seed: bytes) -> PeerIdentity:
    """Deterministic identity from a 32-byte seed (the Ed25519 private scalar seed)."""
    if len(seed) != KEY_SIZE:
        raise ValueError(f"seed must be {KEY_SIZE} bytes, got {len(seed)}")
    return PeerIdentity(private_key=bytes(seed), public_key=_public_from_private(bytes(seed)))


def random_identity() -> PeerIdentity:
    return generate_identity(secrets.token_bytes(KEY_SIZE))


@lru_cache(maxsize=4096)
def _signer(private_key: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(private_key)


def _public_from_private(private_key: bytes) -> bytes:
    return _signer(private_key).public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )


def sign(payload: bytes, private_key: bytes) -> bytes:
    # Ed25519 signing is deterministic (RFC 8032), so equal inputs give equal bytes.
    return _signer(private_key).sign(payload)


@lru_cache(maxsize=1 << 16)
def verify(signature: bytes, payload: bytes, public_key: bytes) -> bool:
    """True iff ``signature`` was produced over ``payload`` by the owner of ``public_key``.

    Results are memoised: the simulator re-checks the same signed messages at
    every peer, and verification is a pure function of its arguments.
    """
    if len(signature) != SIGNATURE_SIZE or len(public_key) != KEY_SIZE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, payload)
    except (InvalidSignature, ValueError):
        return False
    return True


def hash_bytes(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()


# Parent reference of the first real block; there is no genesis body.
GENESIS_HASH = hash_bytes(b"")
