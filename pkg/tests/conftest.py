import pytest

from termitehill.network import EnergyConfig, MacConfig, Network, RadioConfig
from termitehill.protocol import ProtocolParams, protocol_class
from termitehill.sim import RngStream, Simulator


class Recorder:
    """Minimal protocol stand-in that remembers what the network hands it."""

    def __init__(self, net):
        self.net = net
        self.packets = []
        self.events = []
        self.failures = []
        net.protocol = self

    def on_packet(self, node, frame):
        self.packets.append((net_clock(self.net), node, frame))

    def on_app_event(self, node, event):
        self.events.append((net_clock(self.net), node, event))


def net_clock(net):
    return net.sim.clock


def make_net(positions, *, delivery=1.0, energy=None, mac=None, area=(100.0, 100.0), seed=1,
             sink=0, trace=None):
    sim = Simulator()
    radio = RadioConfig(delivery_probability=delivery)
    return Network(sim, list(positions), sink, radio, energy or EnergyConfig(), mac or MacConfig(),
                   area, RngStream(seed, "radio"), trace)


def make_protocol(name, positions, *, delivery=1.0, energy=None, params=None, duration=100.0, seed=1):
    net = make_net(positions, delivery=delivery, energy=energy, seed=seed)
    proto = protocol_class(name)(net, params or ProtocolParams(), RngStream(seed, "protocol"), duration)
    return net, proto


# sink at the left end, nodes 30 m apart: 0 - 1 - 2 - ... (range 35 m)
def chain(n, spacing=30.0):
    return [(5.0 + spacing * i, 50.0) for i in range(n)]


@pytest.fixture
def line3():
    return chain(3)
