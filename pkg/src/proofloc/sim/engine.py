"""Deterministic discrete-event simulation of the proof-of-location network.

Events are ordered by (time_ms, sequence number). All randomness comes from
``random.Random`` instances seeded with strings derived from the scenario
seed, one stream per concern, so adding draws to one concern never shifts
another:

    "<seed>:world"     peer placement
    "<seed>:net"       latency and loss
    "<seed>:proto"     request phases, mint back-off, adversary choices
    "<seed>:rotation"  pseudonym rotation times
"""
from __future__ import annotations

import heapq
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..chain import Block, ChainStore, OrphanPool, append, assemble_block
from ..crypto import PeerIdentity, generate_identity, hash_bytes
from ..geo import GeoLocation, RangeParams, distance_m
from ..messages import ProofRequest, ProofResponse, make_request, make_response
from ..overlay import OverlayParams, PeerRecord, all_contacts, overlay_neighbors, radio_neighbors
from ..validation import (
    RejectReason,
    ValidationContext,
    Verdict,
    reject,
    verify_gossiped_proof,
    verify_request,
    verify_response,
)
from .config import AdversarySpec, AttackKind, ScenarioConfig
from .report import SimReport

RADIO = "radio"
OVERLAY = "overlay"

MS_PER_HOUR = 3_600_000


def identity_for(seed: int, index: int, generation: int) -> PeerIdentity:
    return generate_identity(hash_bytes(f"proofloc:{seed}:{index}:{generation}".encode()))


@dataclass(eq=False)
class Peer:
    index: int
    identity: PeerIdentity
    true_location: GeoLocation
    declared_location: GeoLocation
    store: ChainStore
    attack: Optional[AdversarySpec] = None
    colluder: bool = False
    generation: int = 0
    rotations: int = 0
    orphans: OrphanPool = field(default_factory=OrphanPool)
    pending: dict[bytes, ProofResponse] = field(default_factory=dict)
    outstanding: dict[bytes, tuple[frozenset[bytes], int]] = field(default_factory=dict)
    bad_blocks: set[bytes] = field(default_factory=set)
    sync_asked: set[bytes] = field(default_factory=set)
    sync_pushed: set[tuple[int, bytes]] = field(default_factory=set)
    mint_timer: Optional[bytes] = None
    last_head: Optional[bytes] = None
    # overlay/radio view, refreshed whenever any identity changes
    contacts: frozenset[bytes] = frozenset()
    neighbors: frozenset[bytes] = frozenset()
    radio: frozenset[bytes] = frozenset()
    contact_idx: tuple[int, ...] = ()
    radio_idx: tuple[int, ...] = ()
    known_contacts: frozenset[bytes] = frozenset()
    # adversary scratch
    claim_location: Optional[GeoLocation] = None
    replay_pool: dict[bytes, ProofResponse] = field(default_factory=dict)
    old_requests: list[ProofRequest] = field(default_factory=list)
    victim: Optional[int] = None
    partner: Optional[int] = None
    observed: list[tuple[bytes, GeoLocation, int]] = field(default_factory=list)

    @property
    def pk(self) -> bytes:
        return self.identity.public_key

    @property
    def honest(self) -> bool:
        return self.attack is None and not self.colluder


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config.validate()
        seed = self.cfg.seed
        self.world_rng = random.Random(f"{seed}:world")
        self.net_rng = random.Random(f"{seed}:net")
        self.proto_rng = random.Random(f"{seed}:proto")
        self.rot_rng = random.Random(f"{seed}:rotation")
        self.range = RangeParams(self.cfg.max_range_m)
        self.overlay_params = OverlayParams(self.cfg.k_contacts)
        self.now = 0
        self._queue: list[tuple[int, int, str, int, Any]] = []
        self._seq = 0
        self.archive: dict[bytes, Block] = {}
        self.block_height: dict[bytes, int] = {}
        self.pk_owner: dict[bytes, int] = {}
        self.rejections: Counter = Counter()
        self.attack_verdicts: Counter = Counter()
        self.adv_stats: Counter = Counter()
        self.messages_sent = 0
        self.messages_dropped = 0
        self.events_processed = 0
        self.truncated = False
        self.events: Optional[list[dict[str, Any]]] = [] if self.cfg.record_events else None
        self.declared: dict[bytes, GeoLocation] = {}
        self.peers: list[Peer] = []
        self._handlers: dict[str, Callable[[Peer, Any], None]] = {
            "tick": self._on_tick,
            "req": self._on_request,
            "res": self._on_response,
            "proof": self._on_proof,
            "block": self._on_block,
            "sync_req": self._on_sync_request,
            "sync_res": self._on_sync_response,
            "mint": self._on_mint,
            "rotate": self._on_rotate,
        }
        self._build_world()

    # -- world -------------------------------------------------------------------

    def _origin(self) -> GeoLocation:
        return GeoLocation.from_degrees(self.cfg.origin_lat, self.cfg.origin_lon)

    def _build_world(self) -> None:
        cfg = self.cfg
        origin = self._origin()
        ext = cfg.world_extent_m
        roles: dict[int, AdversarySpec] = {a.peer: a for a in cfg.adversaries}
        partners = {a.partner: a for a in cfg.adversaries if a.kind is AttackKind.COLLUSION}
        for attempt in range(100):
            spots = [
                origin.offset(self.world_rng.uniform(0, ext), self.world_rng.uniform(0, ext))
                for _ in range(cfg.n_peers)
            ]
            self.peers = []
            for i, loc in enumerate(spots):
                self.peers.append(Peer(
                    index=i,
                    identity=identity_for(cfg.seed, i, 0),
                    true_location=loc,
                    declared_location=loc,
                    store=ChainStore(cfg.T, prune=cfg.prune),
                    attack=roles.get(i),
                    colluder=i in partners or (i in roles and roles[i].kind is AttackKind.COLLUSION),
                ))
            for adv in cfg.adversaries:
                self._place_adversary(adv)
            self._refresh_overlay()
            if self._overlay_connected():
                break
        self.world_attempts = attempt + 1
        for p in self.peers:
            self.pk_owner[p.pk] = p.index

    def _place_adversary(self, adv: AdversarySpec) -> None:
        me = self.peers[adv.peer]
        honest = [p for p in self.peers if p.honest]
        if adv.kind is not AttackKind.COLLUSION:
            # a lone attacker needs someone in radio range to be worth simulating
            host = self.world_rng.choice(honest)
            me.true_location = me.declared_location = host.true_location.offset(40.0, 0.0)
        if adv.kind is AttackKind.SPOOF_OWN_LOCATION:
            me.claim_location = me.true_location.offset(adv.displacement_m, 0.0)
        elif adv.kind is AttackKind.SPOOF_OTHER_LOCATION:
            others = [p for p in self.peers if p.index != me.index]
            me.victim = min(others, key=lambda p: (distance_m(p.true_location, me.true_location), p.index)).index
        elif adv.kind is AttackKind.COLLUSION:
            mate = self.peers[adv.partner]
            me.partner, mate.partner = mate.index, me.index
            # colluders sit together; what they lie about is where
            mate.true_location = me.true_location.offset(15.0, 0.0)
            mate.declared_location = mate.true_location
            far = lambda p: min(distance_m(p.true_location, me.true_location),
                                distance_m(p.true_location, mate.true_location))
            observer = max(honest, key=lambda p: (far(p), -p.index))
            fake1 = observer.true_location.offset(30.0, 0.0)
            fake2 = fake1.offset(0.0, 15.0)
            other = max(
                (p for p in honest if p is not observer),
                key=lambda p: (min(far(p), distance_m(p.true_location, observer.true_location)), -p.index),
                default=observer,
            )
            decl1 = other.true_location.offset(30.0, 0.0)
            decl2 = decl1.offset(0.0, 15.0)
            case = adv.case
            if case == "a":
                claims, declared = (fake1, fake2), (fake1, fake2)
            elif case == "b":
                claims, declared = (fake1, fake2), (decl1, decl2)
            elif case == "c":
                claims, declared = (fake1, fake2), (me.true_location, mate.true_location)
            else:
                claims, declared = (me.true_location, mate.true_location), (fake1, fake2)
            me.claim_location, mate.claim_location = claims
            me.declared_location, mate.declared_location = declared
            self.adv_stats["observer_index"] = observer.index

    def _refresh_overlay(self) -> None:
        world = {p.pk: PeerRecord(p.pk, p.declared_location, p.true_location) for p in self.peers}
        contacts = all_contacts(world, self.overlay_params)
        index_of = {p.pk: p.index for p in self.peers}
        self.declared = {pk: r.declared_location for pk, r in world.items()}
        for p in self.peers:
            p.contacts = contacts[p.pk]
            p.neighbors = overlay_neighbors(contacts, p.pk)
            p.radio = radio_neighbors(world, p.pk, self.range)
            p.contact_idx = tuple(sorted(index_of[pk] for pk in p.contacts))
            p.radio_idx = tuple(sorted(index_of[pk] for pk in p.radio))
            p.known_contacts = p.known_contacts | p.contacts

    def _overlay_connected(self) -> bool:
        n = len(self.peers)
        fwd = {p.index: p.contact_idx for p in self.peers}
        back: dict[int, list[int]] = defaultdict(list)
        for i, cs in fwd.items():
            for j in cs:
                back[j].append(i)

        def reach(adj) -> int:
            seen, stack = {0}, [0]
            while stack:
                for j in adj[stack.pop()]:
                    if j not in seen:
                        seen.add(j)
                        stack.append(j)
            return len(seen)

        return reach(fwd) == n and reach(back) == n

    # -- plumbing ----------------------------------------------------------------

    def _push(self, at: int, kind: str, target: int, payload: Any = None) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, kind, target, payload))

    def deliver(self, channel: str, kind: str, payload: Any, src: Peer, to: list[int] | tuple[int, ...],
                adversarial: bool = False) -> int:
        """Schedule independent copies to each recipient; returns how many were scheduled.

        Radio traffic only reaches peers inside ``src``'s radio disc.
        """
        lo, hi = self.cfg.latency_ms
        span = hi - lo + 1
        loss = self.cfg.message_loss_prob
        radio = set(src.radio_idx) if channel == RADIO else None
        scheduled = 0
        for t in sorted(to):
            if t == src.index or (radio is not None and t not in radio):
                continue
            self.messages_sent += 1
            if loss > 0 and self.net_rng.random() < loss:
                self.messages_dropped += 1
                continue
            delay = lo + int(self.net_rng.random() * span)
            self._push(self.now + delay, kind, t, (payload, src.index, adversarial))
            scheduled += 1
        return scheduled

    def ctx_for(self, p: Peer) -> ValidationContext:
        return ValidationContext(
            local_pk=p.pk,
            chain_head=p.store.head,
            chain_view=p.store,
            overlay_contacts=p.contacts,
            radio_reachable=p.radio,
            range=self.range,
            local_location=p.true_location,
            now_ms=self.now,
            freshness_window_ms=self.cfg.freshness_window_ms,
            pending_ids=p.pending.keys(),
            declared_locations=self.declared,
            overlay_neighbors=p.neighbors,
            known_contacts=p.known_contacts,
            check_range=self.cfg.check_range,
        )

    def _log(self, p: Peer, action: str, verdict: str = "") -> None:
        if self.events is not None:
            self.events.append({"record": "event", "time": self.now, "peer": p.index,
                                "action": action, "verdict": verdict})

    def _judge(self, p: Peer, what: str, v: Verdict, adversarial: bool) -> None:
        if not p.honest:
            return
        label = "accept" if v.accepted else v.reason.value
        if not v.accepted:
            self.rejections[v.reason.value] += 1
        if adversarial:
            self.attack_verdicts[label] += 1
            if v.reason is RejectReason.COLLUSION_SUSPECT and p.index == self.adv_stats.get("observer_index"):
                self.adv_stats["observer_flagged"] += 1
        self._log(p, what, label)

    # -- honest behaviour --------------------------------------------------------

    def _on_tick(self, p: Peer, _: Any) -> None:
        nxt = self.now + self.cfg.request_period_ms
        if nxt < self.cfg.duration_ms:
            self._push(nxt, "tick", p.index)
        horizon = self.now - self.cfg.freshness_window_ms
        for key in [k for k, (_, at) in p.outstanding.items() if at < horizon]:
            del p.outstanding[key]
        if p.colluder:
            if p.attack is not None:
                self.adversary_step(p)
            return
        kind = p.attack.kind if p.attack else None
        if kind is AttackKind.SPOOF_OWN_LOCATION:
            self._issue_request(p, p.claim_location, adversarial=True)
        else:
            self._issue_request(p, p.true_location)
        if kind is not None:
            self.adversary_step(p)

    def _issue_request(self, p: Peer, loc: GeoLocation, adversarial: bool = False) -> None:
        targets = tuple(i for i in p.radio_idx if self.peers[i].pk in p.contacts)
        if not targets:
            return
        req = make_request(p.identity, loc, p.store.head, self.now)
        p.outstanding[req.wire] = (frozenset(self.peers[i].pk for i in targets), self.now)
        if p.attack is not None and p.attack.kind is AttackKind.REPLAY_PROOF and len(p.old_requests) < 4:
            p.old_requests.append(req)
        self._log(p, "request")
        self.deliver(RADIO, "req", req, p, targets, adversarial)

    def _on_request(self, q: Peer, msg: tuple[ProofRequest, int, bool]) -> None:
        req, src, adversarial = msg
        if q.colluder:
            return
        v = verify_request(req, self.ctx_for(q))
        self._judge(q, "verify_request", v, adversarial)
        if not v.accepted:
            if v.needs_sync:
                self._resolve_anchor_mismatch(q, self.peers[src], req.prev_block_hash)
            return
        spoof = q.attack is not None and q.attack.kind is AttackKind.SPOOF_OWN_LOCATION
        loc = q.claim_location if spoof else q.true_location
        res = make_response(req, q.identity, loc, self.now)
        self.deliver(RADIO, "res", res, q, (src,), adversarial=spoof)

    def _on_response(self, p: Peer, msg: tuple[ProofResponse, int, bool]) -> None:
        res, src, adversarial = msg
        if res.request.requester_pk != p.pk:
            return
        entry = p.outstanding.get(res.request.wire)
        sent_to = entry[0] if entry else frozenset()
        v = verify_response(res, self.ctx_for(p), sent_to)
        self._judge(p, "verify_response", v, adversarial)
        if v.accepted:
            self._accept_proof(p, res, None)

    def _accept_proof(self, p: Peer, proof: ProofResponse, src: Optional[int], adversarial: bool = False) -> None:
        p.pending[proof.id] = proof
        self.deliver(OVERLAY, "proof", proof, p, tuple(i for i in p.contact_idx if i != src), adversarial)
        self._maybe_mint(p)

    def _on_proof(self, q: Peer, msg: tuple[ProofResponse, int, bool]) -> None:
        proof, src, adversarial = msg
        if q.colluder and q.pk in proof.participants:
            # its own fabrication coming back; adversaries only mint what they relay honestly
            return
        if proof.id in q.pending:
            # same verdict verify_gossiped_proof would reach, without building a context
            v = reject(RejectReason.DUPLICATE_PROOF)
        else:
            v = verify_gossiped_proof(proof, self.ctx_for(q))
        self._judge(q, "verify_gossiped_proof", v, adversarial)
        if v.accepted:
            # an honest relay forwards what it accepted; the taint stays with the origin
            self._accept_proof(q, proof, src)
        elif v.needs_sync:
            self._ask_sync(q, self.peers[src], proof.request.prev_block_hash)

    def _on_block(self, q: Peer, msg: tuple[Block, int, bool], relay: bool = True) -> None:
        block, src, adversarial = msg
        store = q.store
        if block.hash in store or block.hash in q.bad_blocks:
            return
        if block.prev_hash not in store:
            q.orphans.add(block)
            self._ask_sync(q, self.peers[src], block.prev_hash)
            return
        res = append(store, block, self.ctx_for(q))
        if not res.stored:
            q.bad_blocks.add(block.hash)
            if q.honest:
                self.rejections[res.reason.value] += 1
                if adversarial:
                    self.attack_verdicts[res.reason.value] += 1
                self._log(q, "append", res.reason.value)
            return
        self._log(q, "append", res.outcome.value)
        if q.attack is not None and q.attack.kind in (AttackKind.REPLAY_PROOF, AttackKind.IDENTITY_OBSERVER):
            self._observe_block(q, block)
        if relay:
            self.deliver(OVERLAY, "block", block, q, tuple(i for i in q.contact_idx if i != src))
        for child in q.orphans.release(block.hash):
            self._on_block(q, (child, src, False), relay=True)
        self._after_head_change(q)

    def _after_head_change(self, q: Peer) -> None:
        store = q.store
        if store.head != q.last_head:
            q.last_head = store.head
            head, T = store.head, store.T
            for pid in list(q.pending):
                anchor = q.pending[pid].request.prev_block_hash
                if not store.anchor_within(anchor, head, T) or store.proof_confirmed(pid, head, stop_at=anchor):
                    del q.pending[pid]
        self._maybe_mint(q)

    def _ask_sync(self, q: Peer, src: Peer, missing: bytes) -> None:
        if missing in q.sync_asked:
            return
        q.sync_asked.add(missing)
        self.deliver(OVERLAY, "sync_req", missing, q, (src.index,))

    def _resolve_anchor_mismatch(self, q: Peer, src: Peer, anchor: bytes) -> None:
        if anchor not in q.store:
            self._ask_sync(q, src, anchor)
        elif (src.index, q.store.head) not in q.sync_pushed:
            q.sync_pushed.add((src.index, q.store.head))
            self.deliver(OVERLAY, "sync_res", self._recent_blocks(q), q, (src.index,))

    def _recent_blocks(self, q: Peer) -> list[Block]:
        store = q.store
        out = []
        for h in store.window(store.head, 2 * store.T):
            body = store.body(h)
            if body is None:
                break
            out.append(body)
        return out[::-1]

    def _on_sync_request(self, q: Peer, msg: tuple[bytes, int, bool]) -> None:
        _, src, _ = msg
        self.deliver(OVERLAY, "sync_res", self._recent_blocks(q), q, (src,))

    def _on_sync_response(self, q: Peer, msg: tuple[list[Block], int, bool]) -> None:
        blocks, src, _ = msg
        for b in blocks:
            self._on_block(q, (b, src, False), relay=False)

    def _maybe_mint(self, q: Peer) -> None:
        if not q.pending:
            return
        store = q.store
        head = store.head
        if q.pk in store.recent_producers(head):
            return
        if q.mint_timer == head:
            return
        leader = store.eligible_leader(head)
        if leader == q.pk:
            q.mint_timer = head
            self._push(self.now + self.cfg.mint_delay_ms, "mint", q.index, head)
        elif leader is None:
            # open minting: random back-off thins out simultaneous blocks
            q.mint_timer = head
            delay = self.cfg.mint_delay_ms + self.proto_rng.randint(1, self.cfg.open_mint_backoff_ms)
            self._push(self.now + delay, "mint", q.index, head)

    def _on_mint(self, q: Peer, head: bytes) -> None:
        store = q.store
        if q.mint_timer == head:
            q.mint_timer = None
        if store.head != head or q.pk in store.recent_producers(head):
            return
        if store.eligible_leader(head) in (None, q.pk):
            self._mint(q)

    def _mint(self, q: Peer) -> None:
        block = assemble_block(q.pending.values(), q.identity, q.store)
        if block is None:
            q.pending.clear()
            return
        parent_height = q.store.height(q.store.head)
        res = append(q.store, block, self.ctx_for(q))
        if not res.stored:
            self.adv_stats["self_rejected_blocks"] += 1
            return
        self.archive[block.hash] = block
        self.block_height[block.hash] = parent_height + 1
        self._log(q, "mint", res.outcome.value)
        self.deliver(OVERLAY, "block", block, q, q.contact_idx)
        self._after_head_change(q)

    # -- adversaries -------------------------------------------------------------

    def adversary_step(self, p: Peer) -> None:
        """Per-period dishonest action for ``p``'s configured attack."""
        kind = p.attack.kind
        if kind is AttackKind.SPOOF_OTHER_LOCATION:
            self._forge_other(p)
        elif kind is AttackKind.REPLAY_PROOF:
            self._replay(p)
        elif kind is AttackKind.COLLUSION:
            self._collude(p)

    def _forge_other(self, p: Peer) -> None:
        victim = self.peers[p.victim]
        fake = victim.true_location.offset(5_000.0, 0.0)
        # request in the victim's name, signed with our own key
        unsigned = ProofRequest(victim.pk, fake, p.store.head, self.now)
        forged_req = ProofRequest(victim.pk, fake, p.store.head, self.now, p.identity.sign(unsigned.signing_payload()))
        self.deliver(RADIO, "req", forged_req, p, p.radio_idx, adversarial=True)
        # a "proof" in which the victim attests us at the fake spot
        req = make_request(p.identity, fake, p.store.head, self.now)
        unsigned_res = ProofResponse(req, victim.pk, fake, self.now)
        forged = ProofResponse(req, victim.pk, fake, self.now, p.identity.sign(unsigned_res.signing_payload()))
        self.adv_stats["forged"] += 2
        self.deliver(OVERLAY, "proof", forged, p, p.contact_idx, adversarial=True)

    def _observe_block(self, p: Peer, block: Block) -> None:
        for proof in block.proofs:
            if p.attack.kind is AttackKind.REPLAY_PROOF:
                p.replay_pool[proof.id] = proof
            else:
                p.observed.append((proof.request.requester_pk, proof.request.location, proof.request.timestamp_ms))
                p.observed.append((proof.responder_pk, proof.location, proof.timestamp_ms))

    def _replay(self, p: Peer) -> None:
        if p.replay_pool:
            pool = sorted(p.replay_pool)
            for pid in self.proto_rng.sample(pool, min(2, len(pool))):
                self.adv_stats["replayed"] += 1
                self.deliver(OVERLAY, "proof", p.replay_pool[pid], p, p.contact_idx, adversarial=True)
        if p.old_requests and self.now - p.old_requests[0].timestamp_ms > self.cfg.request_period_ms:
            self.adv_stats["replayed"] += 1
            self.deliver(RADIO, "req", p.old_requests[0], p, p.radio_idx, adversarial=True)

    def _collude(self, p: Peer) -> None:
        mate = self.peers[p.partner]
        req = make_request(p.identity, p.claim_location, p.store.head, self.now)
        res = make_response(req, mate.identity, mate.claim_location, self.now)
        self.adv_stats["fabricated"] += 1
        if p.attack.case == "d":
            v = verify_response(res, self.ctx_for(p), frozenset({mate.pk}))
            if v.accepted:
                self.adv_stats["genuine_accepted"] += 1
        self.deliver(OVERLAY, "proof", res, p, p.contact_idx, adversarial=True)
        self.deliver(OVERLAY, "proof", res, mate, mate.contact_idx, adversarial=True)

    # -- pseudonyms --------------------------------------------------------------

    def _rotation_gap(self) -> int:
        rate_per_ms = self.cfg.pseudonym_rotation_rate_per_hour / MS_PER_HOUR
        return max(1, round(self.rot_rng.expovariate(rate_per_ms)))

    def rotate_identity(self, p: Peer) -> None:
        """Replace ``p``'s key pair; pending work under the old key is abandoned."""
        p.generation += 1
        p.identity = identity_for(self.cfg.seed, p.index, p.generation)
        self.pk_owner[p.pk] = p.index
        p.pending.clear()
        p.outstanding.clear()
        p.mint_timer = None
        p.rotations += 1
        self._refresh_overlay()
        self._log(p, "rotate")

    def _on_rotate(self, p: Peer, _: Any) -> None:
        self.rotate_identity(p)
        nxt = self.now + self._rotation_gap()
        if nxt < self.cfg.duration_ms:
            self._push(nxt, "rotate", p.index)

    # -- driver ------------------------------------------------------------------

    def run(self) -> SimReport:
        cfg = self.cfg
        for p in self.peers:
            first = self.proto_rng.randrange(cfg.request_period_ms)
            if first < cfg.duration_ms:
                self._push(first, "tick", p.index)
        if cfg.pseudonym_rotation_rate_per_hour > 0:
            for p in self.peers:
                first = self._rotation_gap()
                if first < cfg.duration_ms:
                    self._push(first, "rotate", p.index)
        while self._queue:
            at, _, kind, target, payload = heapq.heappop(self._queue)
            self.now = at
            self.events_processed += 1
            if self.events_processed > cfg.max_events:
                self.truncated = True
                break
            self._handlers[kind](self.peers[target], payload)
        return self._report()

    # -- reporting ---------------------------------------------------------------

    def is_fake(self, proof: ProofResponse) -> bool:
        """Ground truth: both parties really within range, and neither lies about where it is."""
        a = self.pk_owner.get(proof.request.requester_pk)
        b = self.pk_owner.get(proof.responder_pk)
        if a is None or b is None:
            return True
        r = self.cfg.max_range_m
        ta, tb = self.peers[a].true_location, self.peers[b].true_location
        return (
            distance_m(ta, tb) > r
            or distance_m(proof.request.location, ta) > r
            or distance_m(proof.location, tb) > r
        )

    def _branch_proofs(self, head: bytes, cache: dict[bytes, frozenset[bytes]]) -> frozenset[bytes]:
        if head in cache:
            return cache[head]
        ids: set[bytes] = set()
        h = head
        chain = []
        while h in self.archive:
            chain.append(h)
            h = self.archive[h].prev_hash
        for bh in chain:
            ids |= self.archive[bh].proof_ids
        cache[head] = frozenset(ids)
        return cache[head]

    def _report(self) -> SimReport:
        honest = [p for p in self.peers if p.honest]
        heads = {p.index: p.store.head.hex() for p in self.peers}
        cache: dict[bytes, frozenset[bytes]] = {}
        all_proofs: dict[bytes, ProofResponse] = {}
        for b in self.archive.values():
            for proof in b.proofs:
                all_proofs[proof.id] = proof
        fake: set[bytes] = set()
        for p in honest:
            for pid in self._branch_proofs(p.store.head, cache):
                if self.is_fake(all_proofs[pid]):
                    fake.add(pid)
        ref = honest[0]
        per_height = Counter(self.block_height.values())
        stats = Counter(self.adv_stats)
        observer = [p for p in self.peers if p.attack and p.attack.kind is AttackKind.IDENTITY_OBSERVER]
        for p in observer:
            stats.update(self._linkage(p))
        return SimReport(
            monopoly_violations=sum(self._monopoly_breaches(h) for h in sorted({p.store.head for p in honest})),
            seed=self.cfg.seed,
            final_heads=heads,
            confirmed_proofs=len(self._branch_proofs(ref.store.head, cache)),
            fake_proofs_confirmed=len(fake),
            rejections=dict(self.rejections),
            convergence=len({p.store.head for p in honest}) == 1,
            forks_observed=sum(1 for c in per_height.values() if c > 1),
            blocks_produced=len(self.archive),
            main_height=ref.store.head_height,
            attack_verdicts=dict(self.attack_verdicts),
            adversary_stats=dict(stats),
            rotations=sum(p.rotations for p in self.peers),
            messages_sent=self.messages_sent,
            messages_dropped=self.messages_dropped,
            events_processed=self.events_processed,
            truncated=self.truncated,
            events=self.events,
        )

    def _monopoly_breaches(self, head: bytes) -> int:
        """Count blocks whose producer already minted one of the T blocks before it."""
        producers = []
        h = head
        while h in self.archive:
            producers.append(self.archive[h].producer_pk)
            h = self.archive[h].prev_hash
        producers.reverse()
        T = self.cfg.T
        return sum(1 for i, pk in enumerate(producers) if pk in producers[max(0, i - T):i])

    def _linkage(self, p: Peer) -> Counter:
        """Guess pseudonym links: a key that vanishes and a new key that appears nearby."""
        first: dict[bytes, tuple[int, GeoLocation]] = {}
        last: dict[bytes, tuple[int, GeoLocation]] = {}
        for pk, loc, ts in p.observed:
            if pk not in first or ts < first[pk][0]:
                first[pk] = (ts, loc)
            if pk not in last or ts > last[pk][0]:
                last[pk] = (ts, loc)
        guesses = correct = 0
        for old, (t_end, loc_end) in sorted(last.items()):
            cands = [
                new for new, (t_start, loc_start) in sorted(first.items())
                if new != old and t_start > t_end and distance_m(loc_start, loc_end) <= self.cfg.max_range_m
            ]
            if cands:
                guesses += 1
                correct += self.pk_owner.get(cands[0]) == self.pk_owner.get(old)
        return Counter({"observer_pseudonyms_seen": len(first), "observer_links_guessed": guesses,
                        "observer_links_correct": correct})


def run(config: ScenarioConfig) -> SimReport:
    return Simulation(config).run()
