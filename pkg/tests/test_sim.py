import json
import os
import subprocess
import sys
from dataclasses import replace

import pytest

from proofloc.sim import AdversarySpec, AttackKind, ConfigError, ScenarioConfig, Simulation, load_config, run
from proofloc.sim.engine import OVERLAY, RADIO
from proofloc.sim.scenarios import attack_config

SMALL = ScenarioConfig(n_peers=8, world_extent_m=200.0, duration_ms=20_000)


def test_same_config_same_bytes():
    assert run(SMALL).to_json() == run(SMALL).to_json()


def test_determinism_across_hash_seeds():
    code = (
        "from proofloc.sim import ScenarioConfig, run;"
        "print(run(ScenarioConfig(seed=5, n_peers=8, world_extent_m=200.0, duration_ms=15000)).to_json())"
    )
    outs = set()
    for hs in ("0", "1", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=hs)
        outs.add(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout)
    assert len(outs) == 1


def test_two_peer_world():
    r = run(ScenarioConfig(seed=1, n_peers=2, world_extent_m=50.0, duration_ms=30_000))
    assert r.confirmed_proofs > 0 and r.convergence and r.fake_proofs_confirmed == 0


def test_honest_run_is_safe_and_converges():
    r = run(SMALL)
    assert r.fake_proofs_confirmed == 0
    assert r.convergence
    assert r.monopoly_violations == 0
    assert len(set(r.final_heads.values())) == 1


def test_liveness_grows_with_duration():
    short = run(replace(SMALL, duration_ms=15_000)).confirmed_proofs
    long = run(replace(SMALL, duration_ms=45_000)).confirmed_proofs
    assert 0 < short < long


def _deliveries(loss, sends=10_000):
    sim = Simulation(replace(SMALL, message_loss_prob=loss))
    src = sim.peers[0]
    others = [p.index for p in sim.peers[1:]]
    got = 0
    for i in range(sends):
        got += sim.deliver(OVERLAY, "proof", None, src, (others[i % len(others)],))
    return got


def test_loss_extremes():
    assert _deliveries(0.0, 500) == 500
    assert _deliveries(1.0, 500) == 0


def test_half_loss_fraction():
    assert 0.48 <= _deliveries(0.5) / 10_000 <= 0.52


def test_radio_only_reaches_disc():
    sim = Simulation(SMALL)
    src = sim.peers[0]
    far = [p.index for p in sim.peers if p.index != 0 and p.index not in src.radio_idx]
    if far:
        assert sim.deliver(RADIO, "req", None, src, far) == 0


def test_latency_bounds():
    sim = Simulation(replace(SMALL, latency_ms=(10, 50)))
    sim.deliver(OVERLAY, "proof", None, sim.peers[0], tuple(range(1, 8)))
    delays = [at for at, *_ in sim._queue]
    assert all(10 <= d <= 50 for d in delays)


def test_rotation_zero_rate():
    r = run(SMALL)
    assert r.rotations == 0


def test_rotation_changes_keys():
    sim = Simulation(replace(SMALL, pseudonym_rotation_rate_per_hour=3600.0, duration_ms=10_000))
    before = [p.pk for p in sim.peers]
    r = sim.run()
    assert r.rotations > 0
    rotated = [p for p in sim.peers if p.rotations]
    assert all(p.pk != before[p.index] for p in rotated)
    # proofs created afterwards carry the current keys only
    newest = {p.pk for p in sim.peers}
    for p in rotated:
        assert before[p.index] not in newest


def test_spoof_own_location_rejected_out_of_range():
    r = run(attack_config("SpoofOwnLocation", 2))
    assert r.attack_verdicts and set(r.attack_verdicts) == {"OutOfRange"}


def test_replay_rejected():
    r = run(attack_config("ReplayProof", 3))
    assert r.adversary_stats.get("replayed", 0) > 0
    bad = {k for k in r.attack_verdicts if k != "accept"}
    assert bad <= {"DuplicateProof", "StaleAnchor"}
    assert r.fake_proofs_confirmed == 0


def test_spoof_other_fails_signatures():
    r = run(attack_config("SpoofOtherLocation", 1))
    assert r.attack_verdicts.get("BadSignature", 0) > 0
    assert r.fake_proofs_confirmed == 0


def test_collusion_a_flagged_at_observer():
    r = run(attack_config("Collusion(a)", 4))
    assert r.adversary_stats.get("observer_flagged", 0) > 0
    assert r.fake_proofs_confirmed == 0


def test_identity_observer_reports_linkage():
    r = run(attack_config("IdentityObserver", 1))
    assert "observer_links_guessed" in r.adversary_stats


def test_invalid_proof_not_relayed():
    cfg = attack_config("SpoofOtherLocation", 1, record_events=True)
    sim = Simulation(cfg)
    r = sim.run()
    # forged proofs die at the first honest hop: no honest peer counted them as accepted
    assert "accept" not in r.attack_verdicts


def test_one_block_per_height_per_producer():
    r = run(replace(SMALL, duration_ms=40_000))
    assert r.monopoly_violations == 0


def test_events_recorded_on_request():
    r = run(replace(SMALL, record_events=True, duration_ms=8_000))
    assert r.events and {"time", "peer", "action", "verdict"} <= set(r.events[0])
    assert "events" not in json.loads(r.to_json())


@pytest.mark.parametrize(
    "change, field",
    [
        (dict(n_peers=0), "n_peers"),
        (dict(T=0), "T"),
        (dict(message_loss_prob=1.5), "message_loss_prob"),
        (dict(latency_ms=(50, 10)), "latency_ms"),
        (dict(adversaries=(AdversarySpec(30, AttackKind.REPLAY_PROOF),)), "adversaries[0].peer"),
    ],
)
def test_config_errors_name_field(change, field):
    with pytest.raises(ConfigError) as err:
        replace(ScenarioConfig(), **change).validate()
    assert err.value.field.startswith(field)


def test_collusion_needs_partner():
    with pytest.raises(ConfigError):
        ScenarioConfig(adversaries=(AdversarySpec(0, AttackKind.COLLUSION, case="a"),)).validate()


def test_config_dict_roundtrip(tmp_path):
    cfg = attack_config("Collusion(b)", 9)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    path = tmp_path / "c.toml"
    path.write_text('seed = 4\nn_peers = 6\nlatency_ms = { min = 5, max = 9 }\n'
                    '[[adversaries]]\npeer = 0\nkind = "ReplayProof"\n')
    loaded = load_config(path)
    assert loaded.latency_ms == (5, 9) and loaded.adversaries[0].kind is AttackKind.REPLAY_PROOF
    path.write_text("bogus = 1\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert err.value.field == "bogus"
