import json
import subprocess
import sys

import pytest

from proofloc.cli import main
from proofloc.vectors import golden_vectors

HONEST = "seed = 2\nn_peers = 6\nworld_extent_m = 150.0\nduration_ms = 15000\n"


def lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "honest.toml"
    path.write_text(HONEST)
    return path


def test_run_prints_one_report(cfg, capsys):
    assert main(["run", "--config", str(cfg)]) == 0
    recs = lines(capsys.readouterr().out)
    assert len(recs) == 1
    rep = recs[0]
    assert rep["record"] == "report" and rep["schema_version"] == 1 and rep["convergence"] is True


def test_run_events_stream_first(cfg, capsys):
    assert main(["run", "--config", str(cfg), "--events"]) == 0
    recs = lines(capsys.readouterr().out)
    assert len(recs) > 1
    assert all(r["record"] == "event" and r["schema_version"] == 1 for r in recs[:-1])
    assert recs[-1]["record"] == "report"


def test_seed_override_changes_heads_not_validity(cfg, capsys):
    main(["run", "--config", str(cfg)])
    a = lines(capsys.readouterr().out)[0]
    main(["run", "--config", str(cfg), "--seed", "77"])
    b = lines(capsys.readouterr().out)[0]
    assert a["final_heads"] != b["final_heads"]
    for rep in (a, b):
        assert rep["fake_proofs_confirmed"] == 0 and rep["convergence"]


def test_run_out_file(cfg, tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert lines(out.read_text())[0]["record"] == "report"


def test_bad_config_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("n_peers = 0\n")
    assert main(["run", "--config", str(path)]) == 2
    assert "n_peers" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 2
    assert capsys.readouterr().err


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["run"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_attacks_pass(capsys):
    assert main(["attacks", "--seeds", "1"]) == 0
    captured = capsys.readouterr()
    recs = lines(captured.out)
    assert len(recs) == 8 and all(r["failed_runs"] == 0 for r in recs)
    assert "Collusion(d)" in captured.err


def test_attacks_detect_disabled_range_check(capsys):
    assert main(["attacks", "--seeds", "2", "--disable-range-check"]) == 1
    err = capsys.readouterr().err
    assert "SAFETY VIOLATION: SpoofOwnLocation" in err


def test_vectors_stable(capsys):
    main(["vectors"])
    first = capsys.readouterr().out
    main(["vectors"])
    assert capsys.readouterr().out == first
    recs = {r["name"]: r for r in lines(first)}
    assert recs["request_wire"]["length"] == 80 + 64
    assert recs["request_signing_payload"]["length"] == 1 + 80
    assert {k: v["hex"] for k, v in recs.items()} == golden_vectors()


def test_module_entry_point(cfg):
    proc = subprocess.run([sys.executable, "-m", "proofloc", "vectors"], capture_output=True, text=True)
    assert proc.returncode == 0 and len(lines(proc.stdout)) == len(golden_vectors())
