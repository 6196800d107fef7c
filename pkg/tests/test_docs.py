import json
import re
from pathlib import Path

from proofloc.sim import ScenarioConfig, run
from proofloc.vectors import golden_vectors

ROOT = Path(__file__).resolve().parent.parent


def test_encoding_doc_matches_vectors():
    text = (ROOT / "ENCODING.md").read_text()
    block = text.split("## Golden vectors", 1)[1].split("```", 2)[1]
    documented = dict(re.findall(r"^(\w+) ([0-9a-f]+)$", block, re.M))
    assert documented == golden_vectors()


def test_report_doc_lists_every_field():
    text = (ROOT / "REPORT.md").read_text()
    rep = json.loads(run(ScenarioConfig(n_peers=3, world_extent_m=60.0, duration_ms=6_000)).to_json())
    for key in rep:
        assert f"`{key}`" in text, key
