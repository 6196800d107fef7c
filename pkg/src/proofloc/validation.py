"""Rule engine for requests, responses, gossiped proofs and blocks.

Every check returns a :class:`Verdict`; a rejected verdict carries exactly one
:class:`RejectReason`. Checks are evaluated in a fixed order so the same
(message, context) pair always yields the same verdict.
"""
from __future__ import annotations

from collections.abc import Collection, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .geo import GeoLocation, RangeParams, distance_m
from .messages import ProofRequest, ProofResponse

if TYPE_CHECKING:
    from .chain import Block, ChainStore

DEFAULT_FRESHNESS_WINDOW_MS = 30_000


class RejectReason(str, Enum):
    NOT_A_CONTACT = "NotAContact"
    BAD_SIGNATURE = "BadSignature"
    OUT_OF_RANGE = "OutOfRange"
    STALE_ANCHOR = "StaleAnchor"
    NOT_ADDRESSEE = "NotAddressee"
    DUPLICATE_PROOF = "DuplicateProof"
    STALE_TIMESTAMP = "StaleTimestamp"
    SELF_PROOF = "SelfProof"
    COLLUSION_SUSPECT = "CollusionSuspect"
    INVALID_COORDINATES = "InvalidCoordinates"
    MONOPOLY_VIOLATION = "MonopolyViolation"
    NOT_LEADER = "NotLeader"
    EMPTY_BLOCK = "EmptyBlock"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Verdict:
    reason: Optional[RejectReason] = None
    fork: bool = False
    needs_sync: bool = False

    @property
    def accepted(self) -> bool:
        return self.reason is None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = Verdict()
FORK = Verdict(fork=True)


def reject(reason: RejectReason, needs_sync: bool = False) -> Verdict:
    return Verdict(reason=reason, needs_sync=needs_sync)


@dataclass(frozen=True)
class ValidationContext:
    """Snapshot of everything a peer consults when judging a message.

    ``overlay_neighbors`` holds peers related to the local one by the overlay in
    either direction; ``declared_locations`` is the overlay's directory of
    advertised positions; ``known_contacts`` is every key that has ever been a
    contact (blocks may carry proofs from before a pseudonym rotation).
    """

    local_pk: bytes
    chain_head: bytes
    chain_view: "ChainStore"
    overlay_contacts: frozenset[bytes]
    radio_reachable: frozenset[bytes]
    range: RangeParams
    local_location: GeoLocation
    now_ms: int
    freshness_window_ms: int = DEFAULT_FRESHNESS_WINDOW_MS
    pending_ids: Collection[bytes] = frozenset()
    declared_locations: Mapping[bytes, GeoLocation] = field(default_factory=dict)
    overlay_neighbors: Optional[frozenset[bytes]] = None
    known_contacts: Optional[frozenset[bytes]] = None
    check_range: bool = True  # test hook: False turns every range rule into a no-op

    def __post_init__(self) -> None:
        if self.freshness_window_ms <= 0:
            raise ValueError("freshness_window_ms must be positive")
        if self.overlay_neighbors is None:
            object.__setattr__(self, "overlay_neighbors", self.overlay_contacts)
        if self.known_contacts is None:
            object.__setattr__(self, "known_contacts", self.overlay_contacts)

    @property
    def T(self) -> int:
        return self.chain_view.T

    def in_range(self, a: GeoLocation, b: GeoLocation) -> bool:
        return not self.check_range or distance_m(a, b) <= self.range.max_range_m


def verify_request(req: ProofRequest, ctx: ValidationContext) -> Verdict:
    """Responder-side checks, in order: contact, signature, range, anchor, freshness."""
    if req.requester_pk not in ctx.overlay_contacts or req.requester_pk not in ctx.radio_reachable:
        return reject(RejectReason.NOT_A_CONTACT)
    if not req.signature_ok():
        return reject(RejectReason.BAD_SIGNATURE)
    if not ctx.in_range(req.location, ctx.local_location):
        return reject(RejectReason.OUT_OF_RANGE)
    if req.prev_block_hash != ctx.chain_head:
        # Either side may be behind; the caller starts a chain sync.
        return reject(RejectReason.STALE_ANCHOR, needs_sync=True)
    if abs(ctx.now_ms - req.timestamp_ms) > ctx.freshness_window_ms:
        return reject(RejectReason.STALE_TIMESTAMP)
    return ACCEPT


def verify_response(
    res: ProofResponse, ctx: ValidationContext, sent_to: frozenset[bytes] | set[bytes]
) -> Verdict:
    """Requester-side checks on an answer to one of its own requests."""
    if res.responder_pk not in sent_to:
        return reject(RejectReason.NOT_ADDRESSEE)
    if res.responder_pk == res.request.requester_pk:
        return reject(RejectReason.SELF_PROOF)
    if not res.signatures_ok():
        return reject(RejectReason.BAD_SIGNATURE)
    if not ctx.in_range(res.location, ctx.local_location):
        return reject(RejectReason.OUT_OF_RANGE)
    return ACCEPT


def _proof_intrinsic(p: ProofResponse, ctx: ValidationContext) -> Optional[RejectReason]:
    if p.responder_pk == p.request.requester_pk:
        return RejectReason.SELF_PROOF
    if not p.signatures_ok():
        return RejectReason.BAD_SIGNATURE
    if not ctx.in_range(p.request.location, p.location):
        return RejectReason.OUT_OF_RANGE
    return None


def collusion_suspect(p: ProofResponse, ctx: ValidationContext) -> bool:
    """Cross-check a third-party proof against the overlay and the local radio.

    Suspect when a participant's radio presence contradicts its claim (it says
    it is near us but is silent, or we hear it but it says it is elsewhere),
    when a participant is our overlay neighbour yet neither participant can be
    heard, or when a claimed position contradicts the overlay directory.
    """
    r = ctx.range.max_range_m
    claims = [
        (pk, loc)
        for pk, loc in ((p.request.requester_pk, p.request.location), (p.responder_pk, p.location))
        if pk != ctx.local_pk
    ]
    if not claims:
        return False
    heard = [pk in ctx.radio_reachable for pk, _ in claims]
    for (pk, loc), audible in zip(claims, heard):
        if not audible and distance_m(loc, ctx.local_location) <= r:
            return True
        if audible and not ctx.in_range(loc, ctx.local_location):
            return True
    if not any(heard) and any(pk in ctx.overlay_neighbors for pk, _ in claims):
        return True
    for pk, loc in claims:
        declared = ctx.declared_locations.get(pk)
        if declared is not None and not ctx.in_range(loc, declared):
            return True
    return False


def verify_gossiped_proof(p: ProofResponse, ctx: ValidationContext) -> Verdict:
    """Relay-side checks before a proof is kept and forwarded."""
    reason = _proof_intrinsic(p, ctx)
    if reason is not None:
        return reject(reason)
    store = ctx.chain_view
    if p.id in ctx.pending_ids:
        return reject(RejectReason.DUPLICATE_PROOF)
    anchor = p.request.prev_block_hash
    if not store.anchor_within(anchor, ctx.chain_head, ctx.T):
        return reject(RejectReason.STALE_ANCHOR, needs_sync=anchor not in store)
    if store.proof_confirmed(p.id, ctx.chain_head, stop_at=anchor):
        return reject(RejectReason.DUPLICATE_PROOF)
    if collusion_suspect(p, ctx):
        return reject(RejectReason.COLLUSION_SUSPECT)
    return ACCEPT


def verify_block(b: "Block", ctx: ValidationContext) -> Verdict:
    """Judge a block relative to the local chain.

    Returns ``ACCEPT`` when it extends the head, ``FORK`` when it extends a
    block at most T below the head, and a rejection otherwise.
    """
    store = ctx.chain_view
    if not b.proofs:
        return reject(RejectReason.EMPTY_BLOCK)
    if len({p.id for p in b.proofs}) != len(b.proofs):
        return reject(RejectReason.DUPLICATE_PROOF)
    if not b.signature_ok():
        return reject(RejectReason.BAD_SIGNATURE)

    parent = b.prev_hash
    fork = False
    if parent != ctx.chain_head:
        if parent not in store:
            return reject(RejectReason.STALE_ANCHOR, needs_sync=True)
        if store.height(ctx.chain_head) - store.height(parent) > ctx.T:
            return reject(RejectReason.STALE_ANCHOR)
        fork = True

    if b.producer_pk in store.recent_producers(parent):
        return reject(RejectReason.MONOPOLY_VIOLATION)
    leader = store.eligible_leader(parent)
    if leader is not None and leader != b.producer_pk:
        return reject(RejectReason.NOT_LEADER)

    for p in b.proofs:
        reason = _proof_intrinsic(p, ctx)
        if reason is not None:
            return reject(reason)
        anchor = p.request.prev_block_hash
        if not store.anchor_within(anchor, parent, ctx.T):
            return reject(RejectReason.STALE_ANCHOR)
        if store.proof_confirmed(p.id, parent, stop_at=anchor):
            return reject(RejectReason.DUPLICATE_PROOF)
        if ctx.local_pk in p.participants:
            other = p.responder_pk if p.request.requester_pk == ctx.local_pk else p.request.requester_pk
            if other not in ctx.known_contacts:
                return reject(RejectReason.NOT_A_CONTACT)
    return FORK if fork else ACCEPT
