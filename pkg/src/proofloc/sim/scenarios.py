"""Canned attack scenarios: one family per attack, plus the four collusion sub-cases."""
from __future__ import annotations

from dataclasses import replace

from .config import AdversarySpec, AttackKind, ScenarioConfig

ATTACK_BASE = ScenarioConfig(
    n_peers=25,
    T=5,
    duration_ms=10_000,
    request_period_ms=5_000,
    latency_ms=(10, 50),
)

FAMILIES: dict[str, tuple[AdversarySpec, ...]] = {
    "SpoofOwnLocation": (AdversarySpec(0, AttackKind.SPOOF_OWN_LOCATION, displacement_m=10_000.0),),
    "SpoofOtherLocation": (AdversarySpec(0, AttackKind.SPOOF_OTHER_LOCATION),),
    "ReplayProof": (AdversarySpec(0, AttackKind.REPLAY_PROOF),),
    "Collusion(a)": (AdversarySpec(0, AttackKind.COLLUSION, case="a", partner=1),),
    "Collusion(b)": (AdversarySpec(0, AttackKind.COLLUSION, case="b", partner=1),),
    "Collusion(c)": (AdversarySpec(0, AttackKind.COLLUSION, case="c", partner=1),),
    "Collusion(d)": (AdversarySpec(0, AttackKind.COLLUSION, case="d", partner=1),),
    "IdentityObserver": (AdversarySpec(0, AttackKind.IDENTITY_OBSERVER),),
}

# Families whose fabricated proofs must never reach an honest main branch.
SAFETY_FAMILIES = (
    "SpoofOwnLocation", "SpoofOtherLocation", "ReplayProof",
    "Collusion(a)", "Collusion(b)", "Collusion(c)",
)


def attack_config(family: str, seed: int, base: ScenarioConfig = ATTACK_BASE, **overrides) -> ScenarioConfig:
    cfg = replace(base, seed=seed, adversaries=FAMILIES[family], **overrides)
    if family == "IdentityObserver" and "pseudonym_rotation_rate_per_hour" not in overrides:
        cfg = replace(cfg, pseudonym_rotation_rate_per_hour=240.0)
    return cfg.validate()
