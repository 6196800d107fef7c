import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proofloc.chain import (
    Block,
    ChainStore,
    MissingBodyError,
    OrphanPool,
    Outcome,
    append,
    assemble_block,
    choose_head,
    compute_stake,
    decode_block,
    dump_chain,
    eligible_leader,
    load_chain,
    prune,
    sync,
)
from proofloc.crypto import GENESIS_HASH
from proofloc.validation import RejectReason

from helpers import block, context, ident, leader_index, proof

A, B, C = 1, 2, 3


def pk(i):
    return ident(i).public_key


def brute_stake(blocks: dict, tip: bytes, T: int) -> Counter:
    """Naive recount: walk parents by hand, tally both roles."""
    counts = Counter()
    h, seen = tip, 0
    while h != GENESIS_HASH and seen < T:
        b = blocks[h]
        for p in b.proofs:
            counts[p.request.requester_pk] += 1
            counts[p.responder_pk] += 1
        h = b.prev_hash
        seen += 1
    return counts


def extend(store, producer, pairs, parent=None):
    b = block(producer, parent or store.head, pairs)
    res = append(store, b, context(store))
    return b, res


# -- stake and leader ---------------------------------------------------------------

def test_stake_empty_chain():
    assert compute_stake(ChainStore(5), GENESIS_HASH) == Counter()
    assert eligible_leader(ChainStore(5), GENESIS_HASH) is None


def test_stake_single_block_triangle():
    store = ChainStore(5)
    h = store.insert(block(9, GENESIS_HASH, [(A, B), (A, C), (B, C)]))
    assert compute_stake(store, h) == Counter({pk(A): 2, pk(B): 2, pk(C): 2})


def test_stake_window_excludes_old_blocks():
    store = ChainStore(2)
    h1 = store.insert(block(9, GENESIS_HASH, [(A, B)]))
    h2 = store.insert(block(8, h1, [(C, 4)]))
    h3 = store.insert(block(7, h2, [(C, 5)]))
    stake = compute_stake(store, h3)
    assert pk(A) not in stake and stake[pk(C)] == 2


def test_leader_argmax_and_monopoly_guard():
    store = ChainStore(5)
    # A: 5 appearances, B: 3
    pairs = [(A, 10), (A, 11), (A, 12), (A, B), (A, 13), (B, 14), (B, 15)]
    h = store.insert(block(9, GENESIS_HASH, pairs))
    assert eligible_leader(store, h) == pk(A)
    h2 = store.insert(block(A, GENESIS_HASH, pairs))
    assert eligible_leader(store, h2) == pk(B)


def test_leader_tie_smallest_key():
    store = ChainStore(5)
    h = store.insert(block(9, GENESIS_HASH, [(A, 10), (B, 11), (A, 12), (B, 13)]))
    assert eligible_leader(store, h) == min(pk(A), pk(B))


def test_stake_needs_bodies():
    store = ChainStore(2)
    b = block(9, GENESIS_HASH, [(A, B)])
    store.insert_header(b.header())  # body never seen, as after loading a pruned chain
    with pytest.raises(MissingBodyError):
        compute_stake(store, b.hash)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_stake_matches_bruteforce(seed):
    rng = random.Random(seed)
    T = rng.randint(1, 6)
    store, blocks, tips = ChainStore(T), {}, [GENESIS_HASH]
    for _ in range(rng.randint(0, 12)):
        parent = rng.choice(tips)
        pairs = []
        for _ in range(rng.randint(1, 3)):
            a, b = rng.sample(range(10), 2)
            pairs.append((a, b))
        b = block(rng.randrange(10), parent, pairs, ts=rng.randrange(10**6))
        blocks[store.insert(b)] = b
        tips.append(b.hash)
    for tip in tips:
        assert compute_stake(store, tip) == brute_stake(blocks, tip, T)


# -- append and fork choice -----------------------------------------------------------

def test_append_accepts_leader_block():
    store = ChainStore(5)
    b, res = extend(store, 7, [(A, B)])
    assert res.outcome is Outcome.ACCEPTED and store.head == b.hash
    assert append(store, b, context(store)).outcome is Outcome.KNOWN


def test_append_fork_retained():
    store = ChainStore(5)
    b1, _ = extend(store, 7, [(A, B)])
    b2, _ = extend(store, leader_index(store, b1.hash), [(A, C)])
    sib = block(leader_index(store, b1.hash), b1.hash, [(B, C)])
    res = append(store, sib, context(store))
    assert res.outcome is Outcome.FORK_RETAINED
    assert sib.hash in store


def test_append_too_old_rejected():
    store = ChainStore(1)
    for i in range(5):
        extend(store, leader_index(store, store.head, 70 + i), [(80 + i, 90 + i)])
    old = store.branch()[1]
    res = append(store, block(leader_index(store, old), old, [(A, B)]), context(store))
    assert res.outcome is Outcome.REJECTED and res.reason is RejectReason.STALE_ANCHOR


def test_choose_head_single_branch():
    store = ChainStore(5)
    b, _ = extend(store, 7, [(A, B)])
    assert choose_head(store) == b.hash


def test_choose_head_longest():
    store = ChainStore(5)
    tip5, tip4 = GENESIS_HASH, GENESIS_HASH
    for i in range(5):
        tip5 = store.insert(block(20 + i, tip5, [(30 + i, 40 + i)]))
    for i in range(4):
        tip4 = store.insert(block(50 + i, tip4, [(60 + i, 70 + i)]))
    assert choose_head(store) == tip5


def test_choose_head_stake_tiebreak():
    store = ChainStore(5)
    # producer 7 appears in 7 proofs of its own branch, producer 8 in 2
    rich = store.insert(block(7, GENESIS_HASH, [(7, 100 + i) for i in range(7)]))
    poor = store.insert(block(8, GENESIS_HASH, [(8, 200 + i) for i in range(2)] + [(120, 121)]))
    assert choose_head(store) == rich
    assert poor in store


def test_choose_head_hash_tiebreak():
    store = ChainStore(5)
    x = store.insert(block(7, GENESIS_HASH, [(7, 1)]))
    y = store.insert(block(8, GENESIS_HASH, [(8, 1)]))
    assert choose_head(store) == min(x, y)


# -- assembly --------------------------------------------------------------------

def test_assemble_block():
    store = ChainStore(5)
    ps = [proof(A, B, ts=1), proof(A, C, ts=2), proof(B, C, ts=3)]
    b = assemble_block(ps, ident(A), store)
    assert b.proof_ids == {p.id for p in ps} and b.prev_hash == store.head
    assert [p.id for p in b.proofs] == sorted(p.id for p in ps)
    append(store, b, context(store))
    fresh = proof(A, B, store.head, ts=4)
    nxt = assemble_block(ps + [fresh], ident(B), store)
    assert nxt.proof_ids == {fresh.id}
    assert assemble_block([], ident(A), store) is None


# -- pruning ---------------------------------------------------------------------

def test_prune_heights():
    store = ChainStore(1, prune=True)
    for i in range(5):
        extend(store, leader_index(store, store.head, 40 + i), [(50 + i, 60 + i)])
    bodies = [store.has_body(h) for h in store.branch()[1:]]
    assert bodies == [False, False, False, True, True]
    assert all(h in store for h in store.branch())


def test_prune_short_chain_untouched():
    store = ChainStore(5, prune=True)
    for i in range(3):
        extend(store, leader_index(store, store.head, 40 + i), [(50 + i, 60 + i)])
    assert prune(store) is store
    assert all(store.has_body(h) for h in store.branch()[1:])


# -- sync, dump and orphans -------------------------------------------------------------

def grow(store, n, offset=0):
    made = []
    for i in range(n):
        b, res = extend(store, leader_index(store, store.head, 40 + offset + i), [(50 + offset + i, 60 + offset + i)])
        assert res.stored
        made.append(b)
    return made


def test_sync_catches_up():
    src, dst = ChainStore(5), ChainStore(5)
    blocks = grow(src, 4)
    sync(dst, blocks[:2], context)
    results = sync(dst, blocks, context)
    assert dst.head == src.head
    assert [r.outcome for _, r in results][:2] == [Outcome.KNOWN, Outcome.KNOWN]


def test_sync_skips_invalid_block():
    src, dst = ChainStore(5), ChainStore(5)
    blocks = grow(src, 3)
    bad = Block(blocks[1].proofs, blocks[1].producer_pk, blocks[1].prev_hash, b"\x00" * 64)
    results = sync(dst, [blocks[0], bad], context)
    assert results[0][1].stored and results[1][1].reason is RejectReason.BAD_SIGNATURE
    assert dst.head == blocks[0].hash


def test_sync_out_of_order_and_pairwise():
    a, b = ChainStore(5), ChainStore(5)
    blocks = grow(a, 4)
    sync(b, list(reversed(blocks)), context)
    assert a.head == b.head
    sync(a, [b.body(h) for h in b.branch()[1:]], context)
    assert a.head == b.head


def test_dump_load_roundtrip():
    store = ChainStore(5)
    blocks = grow(store, 3)
    data = dump_chain(blocks)
    back = load_chain(data)
    assert [x.hash for x in back] == [x.hash for x in blocks]
    assert decode_block(blocks[0].wire) == blocks[0]
    with pytest.raises(ValueError):
        load_chain(data[:-1])


def test_orphan_pool_release_sorted():
    pool = OrphanPool()
    x = block(7, b"\x01" * 32, [(A, B)], anchor=GENESIS_HASH)
    y = block(8, b"\x01" * 32, [(A, C)], anchor=GENESIS_HASH)
    pool.add(x)
    pool.add(y)
    pool.add(x)
    assert len(pool) == 2
    assert [b.hash for b in pool.release(b"\x01" * 32)] == sorted([x.hash, y.hash])
    assert len(pool) == 0


def test_main_branch_has_unique_proofs():
    store = ChainStore(3)
    grow(store, 6)
    ids = [pid for h in store.branch()[1:] for pid in store.body(h).proof_ids]
    assert len(ids) == len(set(ids))
