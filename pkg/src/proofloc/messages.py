"""Proof-of-location request/response messages and their canonical encodings.

Wire layout (all integers big-endian, no framing):

    request body   = requester_pk[32] lat:i32 lon:i32 prev_block_hash[32] timestamp_ms:u64   (80 B)
    request wire   = request body || signature[64]                                          (144 B)
    response body  = request wire || responder_pk[32] lat:i32 lon:i32 timestamp_ms:u64      (192 B)
    response wire  = response body || signature[64]                                         (256 B)

A signature always covers ``tag || body`` where the one-byte tag separates
message types (see ``TAG_*``).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property

from .crypto import DIGEST_SIZE, KEY_SIZE, SIGNATURE_SIZE, PeerIdentity, hash_bytes, verify
from .geo import GeoLocation

TAG_REQUEST = b"\x01"
TAG_RESPONSE = b"\x02"
TAG_BLOCK = b"\x03"

_LOC = struct.Struct(">ii")
_U64 = struct.Struct(">Q")

REQUEST_BODY_SIZE = KEY_SIZE + _LOC.size + DIGEST_SIZE + _U64.size
REQUEST_WIRE_SIZE = REQUEST_BODY_SIZE + SIGNATURE_SIZE
RESPONSE_BODY_SIZE = REQUEST_WIRE_SIZE + KEY_SIZE + _LOC.size + _U64.size
RESPONSE_WIRE_SIZE = RESPONSE_BODY_SIZE + SIGNATURE_SIZE


class DecodeError(ValueError):
    pass


class SelfResponseError(ValueError):
    """A peer tried to answer its own request."""


def _check_u64(value: int) -> None:
    if not 0 <= value < 1 << 64:
        raise ValueError(f"timestamp out of u64 range: {value}")


@dataclass(frozen=True)
class ProofRequest:
    requester_pk: bytes
    location: GeoLocation
    prev_block_hash: bytes
    timestamp_ms: int
    signature: bytes = field(default=b"", compare=True)

    def body(self) -> bytes:
        return encode_request(self)

    def signing_payload(self) -> bytes:
        return TAG_REQUEST + self.body()

    def signature_ok(self) -> bool:
        return self._valid

    @cached_property
    def _valid(self) -> bool:
        return verify(self.signature, self.signing_payload(), self.requester_pk)

    @cached_property
    def wire(self) -> bytes:
        return self.body() + self.signature


@dataclass(frozen=True)
class ProofResponse:
    """A response; once verified by the requester it is a proof-of-location."""

    request: ProofRequest
    responder_pk: bytes
    location: GeoLocation
    timestamp_ms: int
    signature: bytes = b""

    def body(self) -> bytes:
        return encode_response(self)

    def signing_payload(self) -> bytes:
        return TAG_RESPONSE + self.body()

    def signature_ok(self) -> bool:
        return self._valid

    @cached_property
    def _valid(self) -> bool:
        return verify(self.signature, self.signing_payload(), self.responder_pk)

    def signatures_ok(self) -> bool:
        return self.request.signature_ok() and self.signature_ok()

    @property
    def participants(self) -> tuple[bytes, bytes]:
        return self.request.requester_pk, self.responder_pk

    @cached_property
    def wire(self) -> bytes:
        return self.body() + self.signature

    @cached_property
    def id(self) -> bytes:
        return hash_bytes(self.signing_payload())

    def __hash__(self) -> int:
        return hash(self.id)


def encode_request(r: ProofRequest) -> bytes:
    """The 80-byte request body (signature excluded)."""
    if len(r.requester_pk) != KEY_SIZE or len(r.prev_block_hash) != DIGEST_SIZE:
        raise ValueError("bad key or digest length")
    _check_u64(r.timestamp_ms)
    return (
        r.requester_pk
        + _LOC.pack(r.location.lat_microdeg, r.location.lon_microdeg)
        + r.prev_block_hash
        + _U64.pack(r.timestamp_ms)
    )


def encode_response(p: ProofResponse) -> bytes:
    """The 192-byte response body: the embedded signed request followed by the responder's claim."""
    if len(p.responder_pk) != KEY_SIZE:
        raise ValueError("bad key length")
    _check_u64(p.timestamp_ms)
    return (
        p.request.wire
        + p.responder_pk
        + _LOC.pack(p.location.lat_microdeg, p.location.lon_microdeg)
        + _U64.pack(p.timestamp_ms)
    )


def decode_request(data: bytes) -> ProofRequest:
    if len(data) != REQUEST_WIRE_SIZE:
        raise DecodeError(f"request wire must be {REQUEST_WIRE_SIZE} bytes, got {len(data)}")
    pk = data[:32]
    lat, lon = _LOC.unpack_from(data, 32)
    prev = data[40:72]
    (ts,) = _U64.unpack_from(data, 72)
    return ProofRequest(pk, GeoLocation(lat, lon), prev, ts, data[80:])


def decode_response(data: bytes) -> ProofResponse:
    if len(data) != RESPONSE_WIRE_SIZE:
        raise DecodeError(f"response wire must be {RESPONSE_WIRE_SIZE} bytes, got {len(data)}")
    req = decode_request(data[:REQUEST_WIRE_SIZE])
    off = REQUEST_WIRE_SIZE
    pk = data[off : off + 32]
    lat, lon = _LOC.unpack_from(data, off + 32)
    (ts,) = _U64.unpack_from(data, off + 40)
    return ProofResponse(req, pk, GeoLocation(lat, lon), ts, data[RESPONSE_BODY_SIZE:])


def make_request(
    identity: PeerIdentity, location: GeoLocation, tip: bytes, now_ms: int
) -> ProofRequest:
    unsigned = ProofRequest(identity.public_key, location, tip, now_ms)
    return ProofRequest(
        identity.public_key, location, tip, now_ms, identity.sign(unsigned.signing_payload())
    )


def make_response(
    request: ProofRequest, identity: PeerIdentity, location: GeoLocation, now_ms: int
) -> ProofResponse:
    if identity.public_key == request.requester_pk:
        raise SelfResponseError("a peer cannot attest its own request")
    unsigned = ProofResponse(request, identity.public_key, location, now_ms)
    return ProofResponse(
        request, identity.public_key, location, now_ms, identity.sign(unsigned.signing_payload())
    )


def proof_id(p: ProofResponse) -> bytes:
    """Digest of the tagged response body; the dedup key for proofs."""
    return p.id
