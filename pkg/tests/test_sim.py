import dataclasses
import math

import numpy as np
import pytest

from coopgeo.mac import MacConfig, ts1_initial, ts1_updated
from coopgeo.routing import RouteConfig, route
from coopgeo.sim import (
    RunResult,
    Scenario,
    ScenarioError,
    ScenarioKind,
    TopologyError,
    default_radio_range,
    gen_random_topology,
    gen_relay_topology,
    gen_void_topology,
    greedy_reaches,
    nodes_for_degree,
    parse_scenario,
    run_baseline,
    run_scenario,
    substream,
)


def test_relay_topology_layout(rng):
    topo = gen_relay_topology(5, rng)
    assert len(topo) == 7
    assert tuple(topo[0]) == (0.0, 0.0) and tuple(topo[1]) == (1.0, 0.0)
    pts = np.array([topo[i] for i in range(2, 7)])
    assert np.all((pts[:, 0] >= 0) & (pts[:, 0] <= 1) & (np.abs(pts[:, 1]) <= 0.5))


def test_relay_topology_deterministic():
    a = gen_relay_topology(5, substream(3, 1))
    b = gen_relay_topology(5, substream(3, 1))
    assert [a[i] for i in range(7)] == [b[i] for i in range(7)]
    with pytest.raises(ValueError):
        gen_relay_topology(0, substream(3, 1))


def test_random_topology_hits_target_degree():
    r, side = 0.14, 0.56
    n = nodes_for_degree(10, side, r)
    degrees = []
    for k in range(20):
        topo = gen_random_topology(n, side, r, substream(5, k), target_neighbors=10)
        assert topo.connected(0, 1)
        degrees.append(topo.mean_degree())
    assert all(9.0 <= d <= 11.0 for d in degrees)


def test_nodes_for_degree_is_unbiased():
    r, side = 0.14, 0.56
    n = nodes_for_degree(10, side, r)
    d = [gen_random_topology(n, side, r, substream(6, k)).mean_degree() for k in range(200)]
    assert np.mean(d) == pytest.approx(10.0, rel=0.1)


def test_random_topology_complete_graph(rng):
    topo = gen_random_topology(12, 1.0, 2.0, rng)
    assert topo.mean_degree() == pytest.approx(11.0)


def test_random_topology_two_nodes(rng):
    topo = gen_random_topology(2, 1.0, 2.0, rng)
    assert len(topo) == 2 and topo.hears(0, 1)


def test_random_topology_gives_up(rng):
    with pytest.raises(TopologyError):
        gen_random_topology(3, 10.0, 0.1, rng, max_resamples=20)
    with pytest.raises(ValueError):
        gen_random_topology(1, 1.0, 1.0, rng)


def test_void_topology_is_connected_and_greedy_stuck():
    for k in range(5):
        topo = gen_void_topology(50, substream(8, k))
        assert topo.connected(0, 1)
        assert not greedy_reaches(topo, 0, 1)


def test_default_radio_range_gives_half_success():
    from coopgeo.phy import PhyConfig, average_ser, packet_symbols

    r = default_radio_range()
    tx = PhyConfig.from_snr_db(25.0).tx_power
    p = (1.0 - average_ser(tx / r**2, 4)) ** packet_symbols(1538, 4)
    assert p == pytest.approx(0.5, abs=1e-6)


def test_substreams_are_independent_and_reproducible():
    a = substream(1, 2, 3).random(4)
    assert np.array_equal(a, substream(1, 2, 3).random(4))
    assert not np.array_equal(a, substream(1, 2, 4).random(4))
    assert not np.array_equal(a, substream(2, 2, 3).random(4))


# Scenario parsing


def test_parse_scenario():
    s = parse_scenario(
        """
        # comment
        kind = TmaxSweep
        neighbors = 10
        tmax_us = 100, 300,500
        qam_m = 16
        trials = 7   # trailing comment
        seed = 42
        baseline = yes
        """
    )
    assert s.kind is ScenarioKind.TMAX_SWEEP
    assert s.tmax_us == (100.0, 300.0, 500.0)
    assert s.qam_m == (16,) and s.trials == 7 and s.seed == 42 and s.baseline
    assert s.x_values == (100.0, 300.0, 500.0) and s.x_name == "tmax_us"


@pytest.mark.parametrize(
    "text, msg",
    [
        ("colour = red", "unknown key: colour"),
        ("trials = 0", "trials must be positive"),
        ("snr_db_min = 30\nsnr_db_max = 20", "SNR range is empty"),
        ("qam_m = 8", "square"),
        ("nsa = 7", "nsa"),
        ("trials = many", "bad value for trials"),
        ("just text", "expected"),
        ("kind = Nope", "bad value for kind"),
    ],
)
def test_parse_scenario_errors(text, msg):
    with pytest.raises(ScenarioError, match=msg):
        parse_scenario(text)


def test_snr_grid():
    s = Scenario(kind=ScenarioKind.RELAY_ORDERING, snr_db_min=15, snr_db_max=30, snr_db_step=5)
    assert s.snr_grid == (15.0, 20.0, 25.0, 30.0)
    assert Scenario(snr_db_min=20, snr_db_max=20).snr_grid == (20.0,)


def test_echo_roundtrip():
    s = Scenario(kind=ScenarioKind.TMAX_SWEEP, tmax_us=(100.0, 300.0), seed=9)
    text = "\n".join(f"{k} = {v}" for k, v in s.echo().items() if v != "None")
    assert parse_scenario(text) == s


# Runs


SMALL = Scenario(kind=ScenarioKind.PER_VS_DENSITY, neighbors=(5,), trials=6, trials_per_topology=3, seed=4)
ORDERING = Scenario(kind=ScenarioKind.RELAY_ORDERING, snr_db_min=20, snr_db_max=25, trials=3, symbols=200)


def test_relay_ordering_arms():
    r = run_scenario(ORDERING)
    assert r.arms() == ["rank1", "rank2", "rank3", "rank4", "rank5", "direct", "random"]
    assert len(r.records) == 2 * 3 * 7
    assert all(t.symbols == 200 and 0 <= t.symbol_errors <= 200 for t in r.records)


def test_run_is_deterministic():
    a, b = run_scenario(SMALL), run_scenario(SMALL)
    assert a.records == b.records


def test_parallel_matches_serial():
    assert run_scenario(SMALL, workers=2).records == run_scenario(SMALL).records


def test_single_trial():
    r = run_scenario(dataclasses.replace(SMALL, trials=1))
    assert len(r.records) == 1
    assert r.records[0].elapsed > 0


def test_record_invariants():
    r = run_scenario(dataclasses.replace(SMALL, baseline=True))
    assert r.arms() == ["coopgeo", "baseline"]
    for t in r.records:
        assert t.elapsed > 0
        assert min(t.hops, t.hop_attempts, t.tx_errors, t.rounds, t.collision_rounds) >= 0
        assert t.collision_rounds <= t.rounds
        assert t.delivered == (t.bits > 0)
        assert t.delivered == (t.reason == "")


def test_merge_is_order_free():
    r = run_scenario(SMALL)
    half = len(r.records) // 2
    a, b = RunResult(SMALL, r.records[:half]), RunResult(SMALL, r.records[half:])
    assert a.merge(b).records == b.merge(a).records == r.records
    with pytest.raises(ValueError):
        a.merge(RunResult(ORDERING, []))


def test_baseline_never_cooperates():
    r = run_baseline(SMALL)
    assert r.arms() == ["baseline"]
    assert all("Coop" not in t.modes for t in r.records)
    with pytest.raises(ScenarioError):
        run_baseline(ORDERING)


def test_baseline_matches_coopgeo_without_errors():
    for k in range(10):
        topo = gen_random_topology(40, 1.0, 0.25, substream(12, k))
        coop = route(0, 1, topo, RouteConfig.ideal(cooperative=True), substream(13, k))
        base = route(0, 1, topo, RouteConfig.ideal(cooperative=False), substream(13, k))
        assert coop.path == base.path
        assert coop.elapsed == base.elapsed


def test_retry_cap_zero_deep_fade():
    s = dataclasses.replace(SMALL, retries=0, snr_db_min=-20.0, snr_db_max=-20.0, baseline=True)
    r = run_scenario(s)
    assert not any(t.delivered for t in r.records)
    assert all(t.reason == "retries" for t in r.records)


def test_hop_elapsed_bounds():
    mac = MacConfig.for_packet(4)
    cap = ts1_initial(mac) + ts1_updated(mac, True)
    topo = gen_random_topology(60, 0.56, 0.14, substream(14, 0))
    cfg = RouteConfig(mac=mac)
    for i in range(20):
        res = route(0, 1, topo, cfg, substream(14, 0, i))
        for h in res.attempts:
            assert 0 < h.elapsed <= cap + 1e-9


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        Scenario(trials=-1)
    with pytest.raises(ScenarioError):
        Scenario(neighbors=())
    with pytest.raises(ScenarioError):
        Scenario(radio_range=0.0)
    assert math.isclose(Scenario().snr_grid[0], 25.0)
