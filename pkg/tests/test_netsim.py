"""Simulated-network convergence harness."""

import random

import pytest

from panocoach import netsim
from panocoach import scene as sc

# Frozen from a run of the seeded scenario below; the simulator is
# bit-deterministic, so any drift means behavior changed.
SEED42_TTC_MS = 1704.314977740857


def teleport_script(n=10, spacing=50):
    script = [(0, sc.SpawnEntity(sc.Entity(id="p1")))]
    for i in range(1, n):
        script.append((i * spacing,
                       sc.TeleportEntity("p1", sc.Pose(float(i), 0.0, 0.0, 0.0))))
    return script


class TestInstantLinks:
    def test_three_clients_converge_within_a_tick(self):
        rep = netsim.run_scenario(netsim.LinkModel(), 3, teleport_script(10))
        assert rep.converged
        assert rep.time_to_converge_ms <= 1000.0 / 30
        assert rep.messages_dropped == 0
        assert set(rep.client_hashes.values()) == {rep.server_hash}

    def test_single_client(self):
        rep = netsim.run_scenario(netsim.LinkModel(), 1, teleport_script(3))
        assert rep.converged


class TestTotalLoss:
    def test_nothing_delivered(self):
        link = netsim.LinkModel(latency_mean_ms=10, loss_prob=1.0, seed=1)
        rep = netsim.run_scenario(link, 3, teleport_script(5), timeout_ms=3000)
        assert not rep.converged
        assert rep.time_to_converge_ms is None
        assert rep.messages_dropped == rep.messages_sent > 0
        assert all(h != rep.server_hash for h in rep.client_hashes.values())


class TestSeedDeterminism:
    def test_identical_runs_produce_identical_reports(self):
        link = netsim.LinkModel(120, 40, 0.1, seed=7)
        script = netsim.generate_script(7, 30)
        a = netsim.run_scenario(link, 4, script)
        b = netsim.run_scenario(link, 4, script)
        assert a == b

    def test_different_seeds_differ(self):
        script = netsim.generate_script(7, 30)
        a = netsim.run_scenario(netsim.LinkModel(120, 40, 0.1, seed=7), 4, script)
        b = netsim.run_scenario(netsim.LinkModel(120, 40, 0.1, seed=8), 4, script)
        assert a.messages_dropped != b.messages_dropped or \
            a.time_to_converge_ms != b.time_to_converge_ms


class TestLossyConvergence:
    def test_seed42_regression(self):
        link = netsim.LinkModel(200, 50, 0.05, seed=42)
        rep = netsim.run_scenario(link, 8, netsim.generate_script(42, 100))
        assert rep.converged
        assert rep.time_to_converge_ms == SEED42_TTC_MS
        assert rep.time_to_converge_ms <= 2000.0
        assert set(rep.client_hashes.values()) == {rep.server_hash}

    def test_snapshot_recovery_under_heavy_loss(self):
        link = netsim.LinkModel(80, 30, 0.30, seed=3)
        rep = netsim.run_scenario(link, 3, netsim.generate_script(3, 40))
        assert rep.converged
        assert rep.messages_dropped > 0

    def test_random_scenarios_converge(self):
        for seed in range(12):
            rng = random.Random(seed)
            link = netsim.LinkModel(rng.choice([0, 80, 200]), rng.choice([0, 30]),
                                    rng.choice([0.0, 0.05, 0.12]), seed)
            script = netsim.generate_script(seed, 25)
            rep = netsim.run_scenario(link, rng.randint(2, 5), script)
            assert rep.converged, f"seed {seed} failed to converge"
            assert set(rep.client_hashes.values()) == {rep.server_hash}


class TestScriptFiles:
    def test_round_trip(self):
        script = netsim.generate_script(5, 30, include_playback=True)
        text = netsim.script_to_json_lines(script)
        back = netsim.script_from_json_lines(text)
        assert back == script


class TestValidation:
    def test_empty_script_rejected(self):
        with pytest.raises(ValueError):
            netsim.run_scenario(netsim.LinkModel(), 2, [])

    def test_zero_clients_rejected(self):
        with pytest.raises(ValueError):
            netsim.run_scenario(netsim.LinkModel(), 0, teleport_script(2))

    def test_bad_loss_prob(self):
        with pytest.raises(ValueError):
            netsim.LinkModel(loss_prob=1.5)

    def test_trace_collection(self):
        rep = netsim.run_scenario(netsim.LinkModel(50, 10, 0.0, 2), 2,
                                  teleport_script(5), collect_trace=True)
        assert rep.trace
        versions = [v for _, _, v in rep.trace]
        assert versions[-1] == 5
