"""Scenario configuration: one flat record, loadable from TOML or a dict."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class AttackKind(str, Enum):
    SPOOF_OWN_LOCATION = "SpoofOwnLocation"
    SPOOF_OTHER_LOCATION = "SpoofOtherLocation"
    REPLAY_PROOF = "ReplayProof"
    COLLUSION = "Collusion"
    IDENTITY_OBSERVER = "IdentityObserver"


COLLUSION_CASES = ("a", "b", "c", "d")


@dataclass(frozen=True)
class AdversarySpec:
    peer: int
    kind: AttackKind
    case: Optional[str] = None  # Collusion sub-case a|b|c|d
    partner: Optional[int] = None  # Collusion partner index
    displacement_m: float = 10_000.0  # SpoofOwnLocation offset

    @property
    def label(self) -> str:
        if self.kind is AttackKind.COLLUSION:
            return f"Collusion({self.case})"
        return self.kind.value


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_peers: int = 25
    world_extent_m: float = 500.0
    T: int = 5
    max_range_m: float = 100.0
    k_contacts: int = 6
    freshness_window_ms: int = 30_000
    duration_ms: int = 60_000
    request_period_ms: int = 5_000
    message_loss_prob: float = 0.0
    latency_ms: tuple[int, int] = (10, 50)
    pseudonym_rotation_rate_per_hour: float = 0.0
    adversaries: tuple[AdversarySpec, ...] = ()
    # extensions
    prune: bool = True
    mint_delay_ms: int = 1_000
    open_mint_backoff_ms: int = 400
    origin_lat: float = 44.8015
    origin_lon: float = 10.3279
    record_events: bool = False
    check_range: bool = True  # mutation hook; never disable outside tests
    max_events: int = 2_000_000

    def validate(self) -> "ScenarioConfig":
        def need(ok: bool, name: str, msg: str) -> None:
            if not ok:
                raise ConfigError(name, msg)

        need(isinstance(self.seed, int) and 0 <= self.seed < 1 << 64, "seed", "must be a 64-bit unsigned integer")
        need(self.n_peers >= 1, "n_peers", "must be a positive integer")
        need(self.world_extent_m > 0, "world_extent_m", "must be positive")
        need(self.T >= 1, "T", "must be a positive integer")
        need(self.max_range_m > 0, "max_range_m", "must be positive")
        need(self.k_contacts >= 1, "k_contacts", "must be a positive integer")
        need(self.freshness_window_ms > 0, "freshness_window_ms", "must be positive")
        need(self.duration_ms > 0, "duration_ms", "must be positive")
        need(self.request_period_ms > 0, "request_period_ms", "must be positive")
        need(0.0 <= self.message_loss_prob <= 1.0, "message_loss_prob", "must lie in [0, 1]")
        lo, hi = self.latency_ms
        need(0 <= lo <= hi, "latency_ms", "need 0 <= min <= max")
        need(self.pseudonym_rotation_rate_per_hour >= 0, "pseudonym_rotation_rate_per_hour", "must be non-negative")
        need(self.mint_delay_ms >= 0, "mint_delay_ms", "must be non-negative")
        need(self.open_mint_backoff_ms >= 1, "open_mint_backoff_ms", "must be positive")
        need(-90 <= self.origin_lat <= 90 and -180 <= self.origin_lon < 180, "origin", "invalid coordinates")
        seen: set[int] = set()
        for i, adv in enumerate(self.adversaries):
            name = f"adversaries[{i}]"
            need(0 <= adv.peer < self.n_peers, f"{name}.peer", "index out of range")
            need(adv.peer not in seen, f"{name}.peer", "peer listed twice")
            seen.add(adv.peer)
            if adv.kind is AttackKind.COLLUSION:
                need(adv.case in COLLUSION_CASES, f"{name}.case", "must be one of a, b, c, d")
                need(adv.partner is not None and 0 <= adv.partner < self.n_peers, f"{name}.partner",
                     "collusion needs a partner index")
                need(adv.partner != adv.peer, f"{name}.partner", "partner must differ from peer")
                need(adv.partner not in seen, f"{name}.partner", "partner already listed")
                seen.add(adv.partner)
        need(self.n_peers - len(seen) >= 1, "adversaries", "at least one honest peer is required")
        return self

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["latency_ms"] = {"min": self.latency_ms[0], "max": self.latency_ms[1]}
        d["adversaries"] = [
            {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(a).items() if v is not None}
            for a in self.adversaries
        ]
        return d

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        data = dict(raw)
        if "latency_ms" in data:
            lat = data["latency_ms"]
            try:
                data["latency_ms"] = (int(lat["min"]), int(lat["max"])) if isinstance(lat, dict) else (int(lat[0]), int(lat[1]))
            except (KeyError, IndexError, TypeError, ValueError):
                raise ConfigError("latency_ms", "expected {min, max}") from None
        if "adversaries" in data:
            advs = []
            for i, a in enumerate(data["adversaries"]):
                try:
                    advs.append(AdversarySpec(
                        peer=int(a["peer"]),
                        kind=AttackKind(a["kind"]),
                        case=a.get("case"),
                        partner=a.get("partner"),
                        displacement_m=float(a.get("displacement_m", 10_000.0)),
                    ))
                except (KeyError, ValueError, TypeError) as exc:
                    raise ConfigError(f"adversaries[{i}]", f"invalid entry ({exc})") from None
            data["adversaries"] = tuple(advs)
        for f in fields(cls):
            if f.name in data and f.name not in ("latency_ms", "adversaries"):
                default = f.default
                try:
                    if isinstance(default, bool):
                        if not isinstance(data[f.name], bool):
                            raise TypeError
                    elif isinstance(default, int):
                        if isinstance(data[f.name], bool) or int(data[f.name]) != data[f.name]:
                            raise TypeError
                        data[f.name] = int(data[f.name])
                    elif isinstance(default, float):
                        data[f.name] = float(data[f.name])
                except (TypeError, ValueError):
                    raise ConfigError(f.name, f"expected {type(default).__name__}") from None
        return cls(**data).validate()


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        raw = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"not valid TOML: {exc}") from None
    return ScenarioConfig.from_dict(raw)
