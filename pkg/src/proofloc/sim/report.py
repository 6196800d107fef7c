"""Simulation report record and its JSON form."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

SCHEMA_VERSION = 1


@dataclass
class SimReport:
    seed: int
    final_heads: dict[int, str]
    confirmed_proofs: int
    fake_proofs_confirmed: int
    rejections: dict[str, int]
    convergence: bool
    forks_observed: int
    blocks_produced: int = 0
    main_height: int = 0
    attack_verdicts: dict[str, int] = field(default_factory=dict)
    adversary_stats: dict[str, int] = field(default_factory=dict)
    rotations: int = 0
    messages_sent: int = 0
    messages_dropped: int = 0
    events_processed: int = 0
    truncated: bool = False
    monopoly_violations: int = 0
    events: Optional[list[dict[str, Any]]] = None

    def to_dict(self, include_events: bool = False) -> dict[str, Any]:
        d = asdict(self)
        d["final_heads"] = {str(k): v for k, v in sorted(self.final_heads.items())}
        d["rejections"] = dict(sorted(self.rejections.items()))
        d["attack_verdicts"] = dict(sorted(self.attack_verdicts.items()))
        d["adversary_stats"] = dict(sorted(self.adversary_stats.items()))
        if not include_events:
            d.pop("events")
        return {"record": "report", "schema_version": SCHEMA_VERSION, **d}

    def to_json(self, include_events: bool = False) -> str:
        return json.dumps(self.to_dict(include_events), sort_keys=True, separators=(",", ":"))
