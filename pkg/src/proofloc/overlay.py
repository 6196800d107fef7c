"""Location-based overlay (k nearest by declared position) and the radio disc model.

The overlay sees what peers *declare*; the radio sees where peers *are*.
Comparing the two is what exposes colluders.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .geo import GeoLocation, RangeParams, distance_m
from .validation import DEFAULT_FRESHNESS_WINDOW_MS, ValidationContext

if TYPE_CHECKING:
    from .chain import ChainStore


class UnknownPeerError(KeyError):
    pass


@dataclass(frozen=True)
class PeerRecord:
    pk: bytes
    declared_location: GeoLocation
    true_location: GeoLocation


@dataclass(frozen=True)
class OverlayParams:
    k_contacts: int = 6

    def __post_init__(self) -> None:
        if self.k_contacts < 1:
            raise ValueError("k_contacts must be >= 1")


World = Mapping[bytes, PeerRecord]


def as_world(records: Iterable[PeerRecord] | World) -> dict[bytes, PeerRecord]:
    if isinstance(records, Mapping):
        return dict(records)
    return {r.pk: r for r in records}


def _lookup(world: World, pk: bytes) -> PeerRecord:
    try:
        return world[pk]
    except KeyError:
        raise UnknownPeerError(pk.hex()) from None


def contacts_of(world: World, p: bytes, params: OverlayParams) -> frozenset[bytes]:
    """The ``k_contacts`` peers nearest to ``p``'s declared location (ties: smaller key)."""
    me = _lookup(world, p)
    ranked = sorted(
        (distance_m(me.declared_location, r.declared_location), pk)
        for pk, r in world.items()
        if pk != p
    )
    return frozenset(pk for _, pk in ranked[: params.k_contacts])


def radio_neighbors(world: World, p: bytes, r: RangeParams) -> frozenset[bytes]:
    """Peers whose true location lies within ``r`` of ``p``'s true location."""
    me = _lookup(world, p)
    return frozenset(
        pk
        for pk, rec in world.items()
        if pk != p and distance_m(me.true_location, rec.true_location) <= r.max_range_m
    )


def all_contacts(world: World, params: OverlayParams) -> dict[bytes, frozenset[bytes]]:
    return {pk: contacts_of(world, pk, params) for pk in world}


def overlay_neighbors(contacts: Mapping[bytes, frozenset[bytes]], p: bytes) -> frozenset[bytes]:
    """Peers linked to ``p`` by the overlay in either direction."""
    back = {q for q, cs in contacts.items() if p in cs}
    return frozenset(contacts.get(p, frozenset()) | back)


@dataclass(frozen=True)
class ContextParams:
    range: RangeParams = field(default_factory=RangeParams)
    overlay: OverlayParams = field(default_factory=OverlayParams)
    freshness_window_ms: int = DEFAULT_FRESHNESS_WINDOW_MS
    now_ms: int = 0
    check_range: bool = True


def build_context(
    world: World,
    p: bytes,
    store: "ChainStore",
    params: ContextParams,
    pending_ids: Iterable[bytes] = (),
    known_contacts: Iterable[bytes] = (),
) -> ValidationContext:
    """Snapshot ``p``'s view: overlay contacts, radio neighbours, chain head, directory."""
    me = _lookup(world, p)
    contacts = all_contacts(world, params.overlay)
    own = contacts[p]
    return ValidationContext(
        local_pk=p,
        chain_head=store.head,
        chain_view=store,
        overlay_contacts=own,
        radio_reachable=radio_neighbors(world, p, params.range),
        range=params.range,
        local_location=me.true_location,
        now_ms=params.now_ms,
        freshness_window_ms=params.freshness_window_ms,
        pending_ids=frozenset(pending_ids),
        declared_locations={pk: r.declared_location for pk, r in world.items()},
        overlay_neighbors=overlay_neighbors(contacts, p),
        known_contacts=own | frozenset(known_contacts),
        check_range=params.check_range,
    )
