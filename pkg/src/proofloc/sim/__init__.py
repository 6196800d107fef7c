from .config import AdversarySpec, AttackKind, ConfigError, ScenarioConfig, load_config
from .engine import Simulation, run
from .report import SimReport

__all__ = [
    "AdversarySpec", "AttackKind", "ConfigError", "ScenarioConfig", "SimReport",
    "Simulation", "load_config", "run",
]
