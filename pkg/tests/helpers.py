"""Shared builders for tests: deterministic identities, proofs, contexts, chains."""
from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Iterable, Optional

from proofloc.chain import Block, ChainStore, make_block
from proofloc.crypto import GENESIS_HASH, PeerIdentity, generate_identity
from proofloc.geo import GeoLocation, RangeParams
from proofloc.messages import ProofResponse, make_request, make_response
from proofloc.validation import ValidationContext

PARMA = GeoLocation(44_801_500, 10_327_900)


@lru_cache(maxsize=None)
def ident(i: int) -> PeerIdentity:
    return generate_identity(hashlib.sha256(f"test-peer:{i}".encode()).digest())


def near(dx: float = 0.0, dy: float = 0.0, base: GeoLocation = PARMA) -> GeoLocation:
    return base.offset(dx, dy)


def proof(
    a: int,
    b: int,
    anchor: bytes = GENESIS_HASH,
    ts: int = 1_000,
    loc_a: Optional[GeoLocation] = None,
    loc_b: Optional[GeoLocation] = None,
) -> ProofResponse:
    req = make_request(ident(a), loc_a or PARMA, anchor, ts)
    return make_response(req, ident(b), loc_b or near(20.0), ts + 5)


def context(
    store: ChainStore,
    local: int = 99,
    contacts: Iterable[int] = (),
    radio: Iterable[int] = (),
    location: GeoLocation = PARMA,
    now_ms: int = 1_000,
    max_range_m: float = 100.0,
    **extra,
) -> ValidationContext:
    return ValidationContext(
        local_pk=ident(local).public_key,
        chain_head=store.head,
        chain_view=store,
        overlay_contacts=frozenset(ident(i).public_key for i in contacts),
        radio_reachable=frozenset(ident(i).public_key for i in radio),
        range=RangeParams(max_range_m),
        local_location=location,
        now_ms=now_ms,
        **extra,
    )


def block(producer: int, parent: bytes, pairs: Iterable[tuple[int, int]], ts: int = 1_000,
          anchor: Optional[bytes] = None) -> Block:
    proofs = [proof(a, b, anchor if anchor is not None else parent, ts + i) for i, (a, b) in enumerate(pairs)]
    return make_block(proofs, ident(producer), parent)


def index_of(pk: bytes, upto: int = 1024) -> int:
    for i in range(upto):
        if ident(i).public_key == pk:
            return i
    raise KeyError(pk.hex())


def leader_index(store: ChainStore, tip: bytes, fallback: int = 0) -> int:
    pk = store.eligible_leader(tip)
    return fallback if pk is None else index_of(pk)
