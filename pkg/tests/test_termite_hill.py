import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from termitehill.network import AppEvent, EnergyConfig
from termitehill.protocol import ProtocolParams
from termitehill.termite_hill import ForwardSoldier

from conftest import chain, make_protocol

# sink 0 on the left, relays 1 (top) and 2 (bottom), source 3 on the right
DIAMOND = [(10, 50), (35, 35), (35, 65), (60, 50)]


def send(net, proto, node, seq, until):
    proto.on_app_event(node, AppEvent(node, seq, net.sim.clock))
    net.sim.run(until)


FREE = EnergyConfig(tx_joules_per_bit=0.0, rx_joules_per_bit=0.0)


def test_discovery_on_a_chain_installs_the_only_path():
    net, th = make_protocol("termite-hill", chain(3), energy=FREE)
    send(net, th, 2, 0, 1.0)
    assert th.counts["fs_launched"] == 1
    assert th.counts["bs_sent"] == 1
    assert th.installed_path((2, 1)) == [2, 1, 0]
    assert net.log.n_delivered == 1  # carried by the forward soldier
    st = th.state[2]
    # flat energy (1000 mJ everywhere): reward = N / (E - 1)
    assert st.table[1, 0] == pytest.approx(1.0 + 3 / 999, rel=1e-12)
    assert not st.cache


def test_sink_answers_only_the_first_copy():
    net, th = make_protocol("termite-hill", DIAMOND)
    send(net, th, 3, 0, 1.0)
    assert th.counts["bs_sent"] == 1  # copies via 1 and via 2 both reached the sink


def test_each_relay_rebroadcasts_once():
    pos = [(10, 50), (35, 35), (35, 65), (60, 50), (60, 20)]
    net, th = make_protocol("termite-hill", pos)
    send(net, th, 3, 0, 1.0)
    # relays 1, 2 and 4 each forward the soldier once; the source ignores echoes
    assert th.counts["fs_rebroadcast"] == 3


def test_hop_limit_with_stochastic_forwarding_off():
    net, th = make_protocol("termite-hill", chain(4), params=ProtocolParams(hmax=1, p_sf=0.0))
    send(net, th, 3, 0, 0.5)  # one discovery round, before the retry timer
    assert th.counts["fs_rebroadcast"] == 1  # node 2 (1 hop) forwards, node 1 (2 hops) does not
    assert th.counts["fs_beyond_hmax"] == 0
    assert th.counts["bs_sent"] == 0


def test_hop_limit_with_certain_stochastic_forwarding():
    net, th = make_protocol("termite-hill", chain(4), params=ProtocolParams(hmax=1, p_sf=1.0))
    send(net, th, 3, 0, 1.0)
    assert th.counts["fs_beyond_hmax"] == 1
    assert th.counts["bs_sent"] == 1


def test_known_route_sends_a_worker_without_discovery():
    net, th = make_protocol("termite-hill", chain(3))
    send(net, th, 2, 0, 1.0)
    sent = th.counts["workers_sent"]
    send(net, th, 2, 1, 2.0)
    assert th.counts["fs_launched"] == 1
    assert th.counts["workers_sent"] == sent + 2  # source and relay
    assert net.log.n_delivered == 2
    assert th.state[0].workers_received == 1


def test_pending_discovery_caches_without_new_soldiers():
    net, th = make_protocol("termite-hill", chain(3))
    th.on_app_event(2, AppEvent(2, 0, 0.0))
    th.on_app_event(2, AppEvent(2, 1, 0.0))
    th.on_app_event(2, AppEvent(2, 2, 0.0))
    assert th.counts["fs_launched"] == 1
    assert len(th.state[2].cache) == 3
    net.sim.run(1.0)
    assert net.log.n_delivered == 3  # one rode the soldier, the rest drained FIFO
    assert not th.state[2].cache


def test_event_cache_drops_oldest_on_overflow():
    net, th = make_protocol("termite-hill", [(10, 50), (90, 50)], params=ProtocolParams(event_cache_size=2))
    for k in range(3):
        th.on_app_event(1, AppEvent(1, k, 0.0))
    assert [e.seq for e in th.state[1].cache] == [1, 2]
    assert net.log.dropped == 1


def test_worker_at_relay_without_entry_triggers_repair():
    net, th = make_protocol("termite-hill", chain(4))
    send(net, th, 3, 0, 1.0)
    th.state[2].forwarding.clear()
    fs_before = th.counts["fs_launched"]
    send(net, th, 3, 1, 2.0)
    assert th.counts["route_failures"] == 1
    assert th.counts["fs_launched"] == fs_before + 1  # relay 2 discovered its own route
    assert th.state[2].counter == 1
    assert net.log.n_delivered == 2


def test_failure_on_sole_route_launches_new_soldier():
    net, th = make_protocol("termite-hill", DIAMOND)
    send(net, th, 3, 0, 1.0)
    pid = next(iter(th.state[3].paths[0].values()))
    relay = th.installed_path(pid)[1]
    net.charge(relay, net.nodes[relay].energy_pj, "test")
    launched = th.counts["fs_launched"]
    send(net, th, 3, 1, 2.0)
    assert th.counts["mac_failures"] >= 1
    assert th.counts["fs_launched"] == launched + 1
    assert relay not in th.state[3].table.neighbors
    assert net.log.n_delivered == 2


def test_failure_without_pending_workers_only_cleans_state():
    net, th = make_protocol("termite-hill", chain(4))
    send(net, th, 3, 0, 1.0)
    st = th.state[2]
    st.table.set(1, 0, 3.0)
    assert any(h == 1 for h in st.forwarding.values())
    launched = th.counts["fs_launched"]
    th.on_mac_failure(2, 1, None)
    assert 1 not in st.table.neighbors
    assert all(h != 1 for h in st.forwarding.values())
    assert th.counts["fs_launched"] == launched


def test_backward_soldier_without_cache_entry_is_dropped():
    net, th = make_protocol("termite-hill", chain(3))
    from termitehill.termite_hill import BackwardSoldier
    th.on_backward_soldier(1, BackwardSoldier(0, (2, 9), 0.5, 0))
    assert th.counts["bs_dropped"] == 1
    assert th.state[1].forwarding == {}


def test_repeat_soldier_replaces_only_when_strictly_better():
    net, th = make_protocol("termite-hill", chain(3))
    st = th.state[1]
    fs = ForwardSoldier(2, 1, 0, 900.0, 900.0, 1, 2)
    th.on_forward_soldier(1, fs)
    entry = st.soldier_cache[(2, 1)]
    stored = entry.reward
    worse = ForwardSoldier(2, 1, 0, 100.0, 900.0, 1, 5)  # same hop count, low-energy path
    th.on_forward_soldier(1, worse)
    assert entry.from_ == 2 and entry.reward == stored


def test_soldier_energy_statistics():
    fs = ForwardSoldier(1, 1, 0, 5.0, 5.0, 1, 1)
    fs = fs.visited(2, 3.0).visited(3, 7.0)
    assert fs.hops == 2 and fs.min_energy == 3.0 and fs.av_energy == pytest.approx(5.0)
    assert fs.min_energy <= fs.av_energy


def test_evaporation_expires_unused_routes():
    net, th = make_protocol("termite-hill", chain(3), duration=200.0)
    th.start()
    send(net, th, 2, 0, 1.0)
    assert th.usable_routes(2)
    net.sim.run(200.0)
    assert not th.usable_routes(2)
    assert not th.state[2].table


def test_dump_tables_writes_probabilities():
    import io
    from termitehill.network import Trace
    buf = io.StringIO()
    net, th = make_protocol("termite-hill", DIAMOND)
    net.trace = th.trace = Trace(buf)
    net.trace.sim = net.sim
    send(net, th, 3, 0, 1.0)
    th.dump_tables()
    rows = [l for l in buf.getvalue().splitlines() if " pheromone " in l]
    assert rows and all("p=" in r for r in rows)


def _random_topology(rng, n):
    while True:
        pts = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(n)]
        seen, stack = {0}, [0]
        while stack:
            a = stack.pop()
            for b in range(n):
                if b not in seen and (pts[a][0] - pts[b][0]) ** 2 + (pts[a][1] - pts[b][1]) ** 2 <= 35 ** 2:
                    seen.add(b)
                    stack.append(b)
        if len(seen) == n:
            return pts


@given(st.integers(0, 10_000), st.integers(4, 12))
@settings(max_examples=25, deadline=None)
def test_installed_paths_are_loop_free_chains(seed, n):
    rng = random.Random(seed)
    pts = _random_topology(rng, n)
    energy = EnergyConfig(initial_energy=1.0)
    net, th = make_protocol("termite-hill", pts, energy=energy, seed=seed)
    for src in range(1, n):
        th.on_app_event(src, AppEvent(src, 0, net.sim.clock))
        net.sim.run(net.sim.clock + 0.5)
    for src in range(1, n):
        for pid in th.state[src].paths.get(0, {}).values():
            path = th.installed_path(pid)
            assert path[0] == src and path[-1] == 0
            assert len(set(path)) == len(path)
            for a, b in zip(path, path[1:]):
                assert net.is_neighbor(a, b)


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
@settings(max_examples=15, deadline=None)
def test_soldier_flood_terminates(seed, p_sf):
    rng = random.Random(seed)
    pts = _random_topology(rng, 10)
    params = ProtocolParams(hmax=2, p_sf=p_sf)
    net, th = make_protocol("termite-hill", pts, params=params, seed=seed)
    th.on_app_event(9, AppEvent(9, 0, 0.0))
    net.sim.run(1000.0)
    assert net.sim.pending == 0  # nothing keeps circulating
    rounds = th.counts["fs_launched"]
    assert 1 <= rounds
    # every node rebroadcasts a given soldier at most once
    assert th.counts["fs_rebroadcast"] <= rounds * (len(pts) - 2)
    if p_sf == 0.0:
        assert th.counts["fs_beyond_hmax"] == 0
