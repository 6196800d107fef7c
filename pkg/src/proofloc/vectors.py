"""Golden conformance vectors: fixed keys, fixed inputs, canonical bytes.

Ed25519 signatures are deterministic, so every value here is stable across
runs and implementations.
"""
from __future__ import annotations

from .chain import make_block
from .crypto import GENESIS_HASH, generate_identity
from .geo import GeoLocation
from .messages import make_request, make_response

ALICE_SEED = bytes(range(32))
BOB_SEED = bytes(range(32, 64))
ALICE_LOCATION = GeoLocation(44_801_500, 10_327_900)
BOB_LOCATION = GeoLocation(44_801_950, 10_328_000)
REQUEST_TS_MS = 1_700_000_000_000
RESPONSE_TS_MS = 1_700_000_000_250


def golden_vectors() -> dict[str, str]:
    """Name -> lowercase hex, in emission order."""
    alice = generate_identity(ALICE_SEED)
    bob = generate_identity(BOB_SEED)
    req = make_request(alice, ALICE_LOCATION, GENESIS_HASH, REQUEST_TS_MS)
    res = make_response(req, bob, BOB_LOCATION, RESPONSE_TS_MS)
    block = make_block([res], bob, GENESIS_HASH)
    return {
        "genesis_hash": GENESIS_HASH.hex(),
        "alice_seed": ALICE_SEED.hex(),
        "alice_pk": alice.public_key.hex(),
        "bob_seed": BOB_SEED.hex(),
        "bob_pk": bob.public_key.hex(),
        "request_signing_payload": req.signing_payload().hex(),
        "request_wire": req.wire.hex(),
        "response_signing_payload": res.signing_payload().hex(),
        "response_wire": res.wire.hex(),
        "proof_id": res.id.hex(),
        "block_wire": block.wire.hex(),
        "block_hash": block.hash.hex(),
    }
