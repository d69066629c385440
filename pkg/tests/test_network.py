import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from termitehill.errors import ConfigError, UnknownNodeError
from termitehill.network import (PJ_PER_J, AppEvent, EnergyConfig, Frame, MacConfig, RadioConfig, Trace,
                                 place_nodes)
from termitehill.sim import RngStream

from conftest import Recorder, make_net


def test_neighbors_by_distance():
    net = make_net([(0, 0), (10, 0)])
    assert net.neighbors_of(0) == {1} and net.neighbors_of(1) == {0}
    far = make_net([(0, 0), (40, 0)])
    assert far.neighbors_of(0) == set() and far.neighbors_of(1) == set()


def test_dead_node_leaves_every_neighbor_set():
    net = make_net([(0, 0), (10, 0), (20, 0)])
    net.charge(1, net.nodes[1].energy_pj, "test")
    assert not net.alive(1)
    assert 1 not in net.neighbors_of(0) and 1 not in net.neighbors_of(2)
    assert net.neighbors_of(1) == set()


def test_unknown_node():
    net = make_net([(0, 0), (10, 0)])
    with pytest.raises(UnknownNodeError):
        net.neighbors_of(5)
    with pytest.raises(UnknownNodeError):
        net.unicast(0, 9, Frame(0, 9, 8))


def test_config_validation():
    with pytest.raises(ConfigError):
        RadioConfig(range=0)
    with pytest.raises(ConfigError):
        RadioConfig(delivery_probability=1.2)
    with pytest.raises(ConfigError):
        EnergyConfig(tx_joules_per_bit=-1)
    with pytest.raises(ConfigError):
        MacConfig(max_retransmissions=-1)
    with pytest.raises(ConfigError):
        make_net([(0, 0), (150, 0)])  # outside the area


def test_broadcast_lossless_reaches_all_neighbors():
    net = make_net([(50, 50), (60, 50), (40, 50), (50, 60)])
    rec = Recorder(net)
    got = net.broadcast(0, Frame(0, -1, 100))
    assert sorted(got) == [1, 2, 3]
    net.sim.run(1.0)
    assert sorted(n for _, n, _ in rec.packets) == [1, 2, 3]
    t = rec.packets[0][0]
    assert t == pytest.approx(100 / 250_000 + 0.001)


def test_broadcast_with_zero_delivery_still_costs_tx():
    net = make_net([(50, 50), (60, 50), (40, 50)], delivery=0.0)
    assert net.broadcast(0, Frame(0, -1, 100)) == []
    assert net.consumed_pj() == round(2e-7 * PJ_PER_J) * 100


def test_broadcast_loss_fraction():
    net = make_net([(50, 50), (60, 50)], delivery=0.5, energy=EnergyConfig(tx_joules_per_bit=0, rx_joules_per_bit=0))
    got = sum(len(net.broadcast(0, Frame(0, -1, 8))) for _ in range(1000))
    assert abs(got / 1000 - 0.5) < 0.05


def test_unicast_lossless_single_attempt():
    net = make_net([(50, 50), (60, 50)])
    assert net.unicast(0, 1, Frame(0, 1, 100)) is True
    assert net.stats["tx"] == 1
    assert net.consumed_pj() == round(2e-7 * PJ_PER_J) * 100 + round(2.2e-7 * PJ_PER_J) * 100


def test_unicast_out_of_range_fails_after_all_attempts():
    net = make_net([(0, 0), (50, 0)])
    assert net.unicast(0, 1, Frame(0, 1, 100)) is False
    assert net.stats["tx"] == 4
    assert net.stats["unicast_failed"] == 1


def test_unicast_retransmission_success_fraction():
    free = EnergyConfig(tx_joules_per_bit=0, rx_joules_per_bit=0)
    net = make_net([(50, 50), (60, 50)], delivery=0.5, energy=free)
    n = 10_000
    ok = sum(net.unicast(0, 1, Frame(0, 1, 8)) for _ in range(n))
    assert abs(ok / n - (1 - 0.5 ** 4)) < 0.01


def test_unicast_retry_adds_ack_wait_to_latency():
    net = make_net([(50, 50), (60, 50)], delivery=0.5, seed=4)
    rec = Recorder(net)
    while not net.unicast(0, 1, Frame(0, 1, 100)):
        pass
    attempts = net.stats["tx"] - 4 * net.stats["unicast_failed"]
    net.sim.run(1.0)
    lat = 100 / 250_000 + 0.001
    assert rec.packets[0][0] == pytest.approx(attempts * lat + (attempts - 1) * 0.002)


def test_traffic_count_and_stop_on_death():
    net = make_net([(50, 50), (60, 50)])
    rec = Recorder(net)
    net.generate_traffic(1, 1.0, 360.0, RngStream(1, "traffic"))
    net.sim.run(360.0)
    assert len(rec.events) == 360 == net.log.generated

    net = make_net([(50, 50), (60, 50)])
    rec = Recorder(net)
    net.generate_traffic(1, 1.0, 360.0, RngStream(1, "traffic"))
    net.sim.run(100.0)
    net.charge(1, net.nodes[1].energy_pj, "test")
    net.sim.run(360.0)
    assert len(rec.events) == 100


def test_sink_never_generates():
    net = make_net([(50, 50), (60, 50)])
    Recorder(net)
    net.generate_traffic(0, 1.0, 10.0, RngStream(1, "t"))
    assert net.sim.pending == 0


def test_sink_relocations():
    net = make_net([(50, 50), (60, 50), (20, 20)])
    Recorder(net)
    net.start_sink_motion(2.0, 360.0, RngStream(1, "sink"))
    positions = []
    orig = net.relocate_sink

    def spy(rng):
        p = orig(rng)
        positions.append(p)
        return p

    net.relocate_sink = spy
    net.sim.run(360.0)
    assert net.stats["relocations"] == 180
    assert all(0 <= x <= 100 and 0 <= y <= 100 for x, y in positions)
    # neighbour sets follow the sink
    x, y = net.position(0)
    for j in (1, 2):
        jx, jy = net.position(j)
        assert (j in net.neighbors_of(0)) == ((x - jx) ** 2 + (y - jy) ** 2 <= 35 ** 2)


def test_delivery_is_counted_once_and_only_at_sink():
    net = make_net([(50, 50), (60, 50)])
    app = AppEvent(1, 0, 0.0)
    assert net.deliver(1, app) is False
    assert net.deliver(0, app) is True
    assert net.deliver(0, app) is False
    assert net.log.n_delivered == 1


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(1, 2000),
                          st.booleans()), max_size=80))
@settings(max_examples=50, deadline=None)
def test_energy_conservation_and_monotonicity(ops):
    net = make_net([(50, 50), (60, 50), (70, 50), (50, 65)], delivery=0.7,
                   energy=EnergyConfig(initial_energy=0.002))
    Recorder(net)
    before = [n.energy_pj for n in net.nodes]
    for a, b, bits, bcast in ops:
        if bcast:
            net.broadcast(a, Frame(a, -1, bits))
        elif a != b:
            net.unicast(a, b, Frame(a, b, bits))
        now = [n.energy_pj for n in net.nodes]
        assert all(x <= y for x, y in zip(now, before))
        assert all(0 <= n.energy_pj <= n.initial_pj for n in net.nodes)
        assert all(n.alive == (n.energy_pj > 0) for n in net.nodes)
        before = now
    assert net.consumed_pj() == net.charged_pj
    assert net.total_energy_consumed() == pytest.approx(net.charged_pj / PJ_PER_J, rel=0, abs=1e-15)


def test_no_activity_means_no_energy():
    net = make_net([(50, 50), (60, 50)])
    net.start_idle_drain(100.0)
    net.sim.run(100.0)
    assert net.total_energy_consumed() == 0.0


def test_idle_drain():
    net = make_net([(50, 50), (60, 50)], energy=EnergyConfig(idle_joules_per_second=0.001))
    net.start_idle_drain(10.0)
    net.sim.run(10.0)
    assert net.total_energy_consumed() == pytest.approx(2 * 10 * 0.001)


def test_placement_is_connected_and_reproducible():
    a = place_nodes(9, (100, 100), (50, 50), 35, RngStream(2, "placement"))
    b = place_nodes(9, (100, 100), (50, 50), 35, RngStream(2, "placement"))
    assert a == b and a[0] == (50, 50)
    net = make_net(a)
    seen, stack = {0}, [0]
    while stack:
        for m in net.neighbors_of(stack.pop()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    assert len(seen) == 9


def test_trace_lines():
    buf = io.StringIO()
    net = make_net([(50, 50), (60, 50)], trace=Trace(buf))
    Recorder(net)
    net.unicast(0, 1, Frame(0, 1, 80, payload="x"))
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("0.000000 tx 0 dst=1 bits=80 attempt=1")
    assert lines[1].startswith("0.000000 rx 1 src=0 bits=80")
