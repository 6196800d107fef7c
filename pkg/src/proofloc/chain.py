"""Block tree, stake window, leader eligibility, fork choice and pruning.

Heights count from the genesis reference (height 0, no body). The stake
window of a tip is its latest ``T`` real blocks; bodies older than ``2T``
below the head may be dropped and only headers kept.
"""
from __future__ import annotations

import struct
from collections import Counter, defaultdict
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

from .crypto import GENESIS_HASH, KEY_SIZE, PeerIdentity, hash_bytes, verify
from .messages import RESPONSE_WIRE_SIZE, TAG_BLOCK, ProofResponse, decode_response
from .validation import RejectReason, ValidationContext, Verdict, verify_block

_U32 = struct.Struct(">I")

StakeTable = Counter  # public key -> proof appearances in the window


class MissingBodyError(LookupError):
    """A consensus computation needed a block body that was pruned."""


@dataclass(frozen=True)
class Block:
    proofs: tuple[ProofResponse, ...]
    producer_pk: bytes
    prev_hash: bytes
    signature: bytes = b""

    def body(self) -> bytes:
        return (
            _U32.pack(len(self.proofs))
            + b"".join(p.wire for p in self.proofs)
            + self.producer_pk
            + self.prev_hash
        )

    def signing_payload(self) -> bytes:
        return TAG_BLOCK + self.body()

    def signature_ok(self) -> bool:
        return self._valid

    @cached_property
    def _valid(self) -> bool:
        return verify(self.signature, self.signing_payload(), self.producer_pk)

    @cached_property
    def wire(self) -> bytes:
        return self.body() + self.signature

    @cached_property
    def hash(self) -> bytes:
        return hash_bytes(self.wire)

    @cached_property
    def proof_ids(self) -> frozenset[bytes]:
        return frozenset(p.id for p in self.proofs)

    def header(self) -> BlockHeader:
        return BlockHeader(self.hash, self.producer_pk, self.prev_hash)


@dataclass(frozen=True)
class BlockHeader:
    block_hash: bytes
    producer_pk: bytes
    prev_hash: bytes


def make_block(proofs: Iterable[ProofResponse], identity: PeerIdentity, prev_hash: bytes) -> Block:
    """Sign a block; proofs are put in canonical (proof id) order."""
    ordered = tuple(sorted(proofs, key=lambda p: p.id))
    unsigned = Block(ordered, identity.public_key, prev_hash)
    return Block(ordered, identity.public_key, prev_hash, identity.sign(unsigned.signing_payload()))


def decode_block(data: bytes) -> Block:
    (n,) = _U32.unpack_from(data, 0)
    off = _U32.size
    proofs = []
    for _ in range(n):
        proofs.append(decode_response(data[off : off + RESPONSE_WIRE_SIZE]))
        off += RESPONSE_WIRE_SIZE
    producer = data[off : off + KEY_SIZE]
    prev = data[off + KEY_SIZE : off + 2 * KEY_SIZE]
    sig = data[off + 2 * KEY_SIZE :]
    if len(producer) != KEY_SIZE or len(prev) != 32 or len(sig) != 64:
        raise ValueError("truncated block encoding")
    return Block(tuple(proofs), producer, prev, sig)


def dump_chain(blocks: Iterable[Block]) -> bytes:
    """Length-prefixed (u32 big-endian) concatenation of block wire encodings."""
    return b"".join(_U32.pack(len(b.wire)) + b.wire for b in blocks)


def load_chain(data: bytes) -> list[Block]:
    out, off = [], 0
    while off < len(data):
        (n,) = _U32.unpack_from(data, off)
        off += _U32.size
        if off + n > len(data):
            raise ValueError("truncated chain dump")
        out.append(decode_block(data[off : off + n]))
        off += n
    return out


@dataclass
class _Entry:
    header: BlockHeader
    height: int
    body: Optional[Block] = None


class Outcome(str, Enum):
    ACCEPTED = "Accepted"
    FORK_RETAINED = "ForkRetained"
    REJECTED = "Rejected"
    KNOWN = "Known"


@dataclass(frozen=True)
class AppendResult:
    outcome: Outcome
    reason: Optional[RejectReason] = None
    needs_sync: bool = False

    @property
    def stored(self) -> bool:
        return self.outcome in (Outcome.ACCEPTED, Outcome.FORK_RETAINED)


class ChainStore:
    """Block tree keyed by block hash, with the head chosen by :meth:`choose_head`."""

    def __init__(self, T: int, prune: bool = False):
        if T < 1:
            raise ValueError("T must be a positive integer")
        self.T = T
        self.prune_enabled = prune
        self.genesis = GENESIS_HASH
        self._entries: dict[bytes, _Entry] = {
            GENESIS_HASH: _Entry(BlockHeader(GENESIS_HASH, b"", b""), 0)
        }
        self.children: dict[bytes, set[bytes]] = defaultdict(set)
        self._by_height: dict[int, set[bytes]] = defaultdict(set, {0: {GENESIS_HASH}})
        self._max_height = 0
        self._pruned_upto = 0
        self._stake_cache: dict[bytes, Counter] = {}
        self._leader_cache: dict[bytes, Optional[bytes]] = {}
        self.head = GENESIS_HASH

    # -- lookups -------------------------------------------------------------

    def __contains__(self, h: bytes) -> bool:
        return h in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def height(self, h: bytes) -> int:
        return self._entries[h].height

    def header(self, h: bytes) -> BlockHeader:
        return self._entries[h].header

    def body(self, h: bytes) -> Optional[Block]:
        return self._entries[h].body

    def has_body(self, h: bytes) -> bool:
        e = self._entries.get(h)
        return e is not None and e.body is not None

    def hashes(self) -> list[bytes]:
        return list(self._entries)

    @property
    def head_height(self) -> int:
        return self._entries[self.head].height

    def ancestors(self, tip: bytes) -> Iterator[bytes]:
        """Hashes from ``tip`` back to genesis, inclusive."""
        h = tip
        while True:
            yield h
            if h == self.genesis:
                return
            h = self._entries[h].header.prev_hash

    def branch(self, tip: Optional[bytes] = None) -> list[bytes]:
        """Main branch from genesis to ``tip`` (head by default)."""
        return list(self.ancestors(self.head if tip is None else tip))[::-1]

    def window(self, tip: bytes, n: Optional[int] = None) -> list[bytes]:
        """The latest ``n`` (default T) real blocks ending at ``tip``, newest first."""
        n = self.T if n is None else n
        out = []
        for h in self.ancestors(tip):
            if h == self.genesis or len(out) == n:
                break
            out.append(h)
        return out

    def anchor_within(self, anchor: bytes, tip: bytes, depth: int) -> bool:
        """True iff ``anchor`` is one of the ``depth`` most recent entries ending at ``tip``.

        The genesis reference counts as an entry so that requests on a fresh
        chain can anchor to it.
        """
        if anchor not in self._entries or tip not in self._entries:
            return False
        for i, h in enumerate(self.ancestors(tip)):
            if i >= depth:
                return False
            if h == anchor:
                return True
        return False

    def proof_confirmed(self, pid: bytes, tip: bytes, stop_at: Optional[bytes] = None) -> bool:
        """Whether ``pid`` appears in a block on the branch ending at ``tip``.

        The walk ends at ``stop_at`` (a proof cannot sit at or below the block
        it is anchored to) or at the first pruned body.
        """
        if tip not in self._entries:
            return False
        for h in self.ancestors(tip):
            if h == stop_at or h == self.genesis:
                return False
            body = self._entries[h].body
            if body is None:
                return False
            if pid in body.proof_ids:
                return True
        return False

    # -- consensus -------------------------------------------------------------

    def compute_stake(self, tip: bytes) -> Counter:
        cached = self._stake_cache.get(tip)
        if cached is not None:
            return Counter(cached)
        stake: Counter = Counter()
        for h in self.window(tip):
            body = self._entries[h].body
            if body is None:
                raise MissingBodyError(f"body of {h.hex()[:12]} was pruned")
            for p in body.proofs:
                for pk in p.participants:
                    stake[pk] += 1
        self._stake_cache[tip] = stake
        return Counter(stake)

    def recent_producers(self, tip: bytes) -> set[bytes]:
        return {self._entries[h].header.producer_pk for h in self.window(tip)}

    def eligible_leader(self, tip: bytes) -> Optional[bytes]:
        """Plurality stakeholder of the window, excluding its recent producers.

        Ties go to the lexicographically smallest key; ``None`` means nobody is
        eligible and minting is open to any peer not barred by the monopoly guard.
        """
        if tip in self._leader_cache:
            return self._leader_cache[tip]
        stake = self.compute_stake(tip)
        barred = self.recent_producers(tip)
        best = None
        for pk, count in stake.items():
            if pk in barred:
                continue
            if best is None or (-count, pk) < (-stake[best], best):
                best = pk
        self._leader_cache[tip] = best
        return best

    def tip_stake(self, tip: bytes) -> int:
        if tip == self.genesis:
            return 0
        return self.compute_stake(tip)[self._entries[tip].header.producer_pk]

    def choose_head(self) -> bytes:
        """Highest tip; ties by greater producer stake on its branch, then smallest hash."""
        tips = self._by_height[self._max_height]
        best = min(tips, key=lambda h: (-self.tip_stake(h), h))
        self.head = best
        return best

    # -- mutation --------------------------------------------------------------

    def insert(self, block: Block) -> bytes:
        """Store ``block`` without validation. Its parent must already be stored."""
        h = block.hash
        if h in self._entries:
            return h
        parent = self._entries.get(block.prev_hash)
        if parent is None:
            raise KeyError(f"unknown parent {block.prev_hash.hex()[:12]}")
        height = parent.height + 1
        self._entries[h] = _Entry(block.header(), height, block)
        self.children[block.prev_hash].add(h)
        self._by_height[height].add(h)
        self._max_height = max(self._max_height, height)
        return h

    def insert_header(self, header: BlockHeader) -> None:
        """Store a bare header (used when loading a pruned chain)."""
        parent = self._entries[header.prev_hash]
        height = parent.height + 1
        self._entries[header.block_hash] = _Entry(header, height, None)
        self.children[header.prev_hash].add(header.block_hash)
        self._by_height[height].add(header.block_hash)
        self._max_height = max(self._max_height, height)

    def prune(self) -> int:
        """Drop bodies at heights ``<= head_height - 2T``. Returns how many were dropped."""
        if not self.prune_enabled:
            return 0
        cutoff = self.head_height - 2 * self.T
        dropped = 0
        for height in range(self._pruned_upto + 1, cutoff + 1):
            for h in self._by_height.get(height, ()):
                entry = self._entries[h]
                if entry.body is not None:
                    entry.body = None
                    dropped += 1
        self._pruned_upto = max(self._pruned_upto, cutoff)
        return dropped


def compute_stake(store: ChainStore, tip: bytes) -> Counter:
    return store.compute_stake(tip)


def eligible_leader(store: ChainStore, tip: bytes) -> Optional[bytes]:
    return store.eligible_leader(tip)


def choose_head(store: ChainStore) -> bytes:
    return store.choose_head()


def prune(store: ChainStore) -> ChainStore:
    store.prune()
    return store


def append(store: ChainStore, block: Block, ctx: ValidationContext) -> AppendResult:
    """Validate ``block`` against ``ctx`` and store it on success; re-chooses the head."""
    if block.hash in store:
        return AppendResult(Outcome.KNOWN)
    verdict: Verdict = verify_block(block, ctx)
    if not verdict.accepted:
        return AppendResult(Outcome.REJECTED, verdict.reason, verdict.needs_sync)
    store.insert(block)
    store.choose_head()
    store.prune()
    return AppendResult(Outcome.FORK_RETAINED if verdict.fork else Outcome.ACCEPTED)


def assemble_block(
    pending: Iterable[ProofResponse], identity: PeerIdentity, store: ChainStore
) -> Optional[Block]:
    """Pack every pending proof that is still includable on the current head."""
    tip = store.head
    chosen: dict[bytes, ProofResponse] = {}
    for p in pending:
        if p.id in chosen:
            continue
        anchor = p.request.prev_block_hash
        if not store.anchor_within(anchor, tip, store.T):
            continue
        if store.proof_confirmed(p.id, tip, stop_at=anchor):
            continue
        chosen[p.id] = p
    if not chosen:
        return None
    return make_block(chosen.values(), identity, tip)


class OrphanPool:
    """Blocks whose parent has not arrived yet, keyed by the missing parent."""

    def __init__(self) -> None:
        self._waiting: dict[bytes, dict[bytes, Block]] = defaultdict(dict)

    def add(self, block: Block) -> None:
        self._waiting[block.prev_hash][block.hash] = block

    def release(self, parent: bytes) -> list[Block]:
        return sorted(self._waiting.pop(parent, {}).values(), key=lambda b: b.hash)

    def __len__(self) -> int:
        return sum(len(v) for v in self._waiting.values())


def sync(
    store: ChainStore,
    remote_view: Sequence[Block],
    make_ctx: Callable[[ChainStore], ValidationContext],
) -> list[tuple[Block, AppendResult]]:
    """Append every usable block from ``remote_view``.

    Blocks are tried in order; ones whose parent is still unknown are retried
    once a later block supplies it. Invalid blocks are rejected individually.
    """
    results: list[tuple[Block, AppendResult]] = []
    orphans = OrphanPool()

    def attempt(block: Block) -> None:
        if block.prev_hash not in store:
            orphans.add(block)
            return
        res = append(store, block, make_ctx(store))
        results.append((block, res))
        if res.stored:
            for child in orphans.release(block.hash):
                attempt(child)

    for block in remote_view:
        attempt(block)
    return results
