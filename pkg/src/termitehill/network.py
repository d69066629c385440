"""Sensor field: nodes, unit-disk radio with Bernoulli loss, MAC retries,
energy accounting, CBR traffic and sink relocation.

Energy is kept internally as integer picojoules so that the running total of
charges and the per-node remaining energy agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable

from .errors import ConfigError, UnknownNodeError
from .sim import EventKind, RngStream, Simulator

PJ_PER_J = 10**12
BROADCAST = -1


def to_pj(joules: float) -> int:
    return int(round(joules * PJ_PER_J))


@dataclass(frozen=True)
class RadioConfig:
    range: float = 35.0
    delivery_probability: float = 0.95
    data_rate: float = 250_000.0
    processing_delay: float = 0.001

    def __post_init__(self):
        if not self.range > 0:
            raise ConfigError(f"radio range must be > 0, got {self.range}")
        if not 0.0 <= self.delivery_probability <= 1.0:
            raise ConfigError(f"delivery_probability must lie in [0, 1], got {self.delivery_probability}")
        if not self.data_rate > 0:
            raise ConfigError(f"data_rate must be > 0, got {self.data_rate}")
        if self.processing_delay < 0:
            raise ConfigError("processing_delay must be >= 0")

    def latency(self, size_bits: int) -> float:
        return size_bits / self.data_rate + self.processing_delay


@dataclass(frozen=True)
class EnergyConfig:
    tx_joules_per_bit: float = 2.0e-7
    rx_joules_per_bit: float = 2.2e-7
    idle_joules_per_second: float = 0.0
    initial_energy: float = 1.0

    def __post_init__(self):
        for name in ("tx_joules_per_bit", "rx_joules_per_bit", "idle_joules_per_second"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.initial_energy > 0:
            raise ConfigError("initial_energy must be > 0")


@dataclass(frozen=True)
class MacConfig:
    max_retransmissions: int = 3
    ack_timeout: float = 0.002

    def __post_init__(self):
        if self.max_retransmissions < 0:
            raise ConfigError("max_retransmissions must be >= 0")
        if self.ack_timeout < 0:
            raise ConfigError("ack_timeout must be >= 0")


@dataclass
class NodeState:
    id: int
    position: tuple[float, float]
    initial_pj: int
    energy_pj: int
    role: str = "source"
    alive: bool = True
    death_time: float | None = None

    @property
    def energy(self) -> float:
        return self.energy_pj / PJ_PER_J

    @property
    def initial_energy(self) -> float:
        return self.initial_pj / PJ_PER_J


class Frame:
    __slots__ = ("sender", "destination", "size_bits", "payload")

    def __init__(self, sender: int, destination: int, size_bits: int, payload=None):
        if size_bits <= 0:
            raise ValueError("frame size must be positive")
        self.sender = sender
        self.destination = destination
        self.size_bits = size_bits
        self.payload = payload

    def __repr__(self):
        return f"Frame({self.sender}->{self.destination}, {self.size_bits}b, {self.payload!r})"


class AppEvent:
    """One sensed phenomenon, identified by ``(source, seq)``."""

    __slots__ = ("source", "seq", "created")

    def __init__(self, source: int, seq: int, created: float):
        self.source = source
        self.seq = seq
        self.created = created

    @property
    def key(self):
        return (self.source, self.seq)

    def __repr__(self):
        return f"AppEvent({self.source}#{self.seq}@{self.created:g})"


class Trace:
    """Line-delimited run log: ``time kind node key=value ...``."""

    def __init__(self, stream: IO[str] | None = None, enabled: bool = True):
        self.stream = stream
        self.enabled = enabled and stream is not None
        self.sim: Simulator | None = None

    def record(self, kind: str, node, **fields) -> None:
        if not self.enabled:
            return
        t = self.sim.clock if self.sim is not None else 0.0
        parts = [f"{t:.6f}", kind, str(node)]
        parts.extend(f"{k}={_fmt(v)}" for k, v in fields.items())
        self.stream.write(" ".join(parts) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


NULL_TRACE = Trace(None, enabled=False)


@dataclass
class DeliveryLog:
    generated: int = 0
    delivered: dict = field(default_factory=dict)  # (source, seq) -> latency
    dropped: int = 0

    @property
    def n_delivered(self) -> int:
        return len(self.delivered)

    def mean_latency(self) -> float | None:
        if not self.delivered:
            return None
        return math.fsum(self.delivered.values()) / len(self.delivered)


class Network:
    def __init__(
        self,
        sim: Simulator,
        positions: list[tuple[float, float]],
        sink_id: int,
        radio: RadioConfig,
        energy: EnergyConfig,
        mac: MacConfig,
        area: tuple[float, float],
        rng: RngStream,
        trace: Trace | None = None,
    ):
        self.sim = sim
        self.radio = radio
        self.energy_cfg = energy
        self.mac = mac
        self.area = area
        self.rng = rng
        self.trace = trace or NULL_TRACE
        self.trace.sim = sim
        self.sink_id = sink_id
        e0 = to_pj(energy.initial_energy)
        self.nodes = [
            NodeState(i, _inside(p, area), e0, e0, "sink" if i == sink_id else "source")
            for i, p in enumerate(positions)
        ]
        self._tx_pj = to_pj(energy.tx_joules_per_bit)
        self._rx_pj = to_pj(energy.rx_joules_per_bit)
        self._range2 = radio.range * radio.range
        self._nbrs: list[set[int]] = [set() for _ in self.nodes]
        self._sorted: list[tuple[int, ...]] = [() for _ in self.nodes]
        for i in range(len(self.nodes)):
            for j in range(i + 1, len(self.nodes)):
                if self._in_range(i, j):
                    self._nbrs[i].add(j)
                    self._nbrs[j].add(i)
        for i in range(len(self.nodes)):
            self._sorted[i] = tuple(sorted(self._nbrs[i]))
        self.protocol = None
        self.log = DeliveryLog()
        self.charged_pj = 0
        self.charge_count = 0
        self.stats = {"tx": 0, "rx": 0, "unicast_failed": 0, "relocations": 0, "deaths": 0}
        self._traffic_end = math.inf
        sim.on(EventKind.PACKET_ARRIVAL, self._on_arrival)

    # topology -----------------------------------------------------------

    def __len__(self):
        return len(self.nodes)

    def _check(self, node: int) -> NodeState:
        if not isinstance(node, int) or not 0 <= node < len(self.nodes):
            raise UnknownNodeError(node)
        return self.nodes[node]

    def _in_range(self, a: int, b: int) -> bool:
        na, nb = self.nodes[a], self.nodes[b]
        if not (na.alive and nb.alive):
            return False
        dx = na.position[0] - nb.position[0]
        dy = na.position[1] - nb.position[1]
        return dx * dx + dy * dy <= self._range2

    def neighbors_of(self, node: int) -> set[int]:
        self._check(node)
        return set(self._nbrs[node])

    def neighbors(self, node: int) -> tuple[int, ...]:
        """Current neighbours in ascending id order (no copy, no validation)."""
        return self._sorted[node]

    def is_neighbor(self, a: int, b: int) -> bool:
        return b in self._nbrs[a]

    def alive(self, node: int) -> bool:
        return self.nodes[node].alive

    def energy(self, node: int) -> float:
        return self.nodes[node].energy_pj / PJ_PER_J

    def position(self, node: int) -> tuple[float, float]:
        return self._check(node).position

    def _relink(self, node: int) -> None:
        for other in self._nbrs[node]:
            self._nbrs[other].discard(node)
            self._sorted[other] = tuple(sorted(self._nbrs[other]))
        self._nbrs[node] = set()
        if self.nodes[node].alive:
            for other in range(len(self.nodes)):
                if other != node and self._in_range(node, other):
                    self._nbrs[node].add(other)
                    self._nbrs[other].add(node)
                    self._sorted[other] = tuple(sorted(self._nbrs[other]))
        self._sorted[node] = tuple(sorted(self._nbrs[node]))

    def move(self, node: int, position: tuple[float, float]) -> None:
        self._check(node).position = _inside(position, self.area)
        self._relink(node)

    # energy ---------------------------------------------------------------

    def charge(self, node: int, pj: int, reason: str, record: bool = True) -> bool:
        """Debit ``pj`` picojoules; returns whether the node is still alive.

        Radio charges pass ``record=False`` because the tx/rx trace line
        already carries the amount and the remaining energy.
        """
        st = self.nodes[node]
        if not st.alive:
            return False
        amount = pj if pj < st.energy_pj else st.energy_pj
        st.energy_pj -= amount
        self.charged_pj += amount
        self.charge_count += 1
        if record and self.trace.enabled:
            self.trace.record("charge", node, reason=reason, pj=amount, left=st.energy_pj)
        if st.energy_pj <= 0:
            self._kill(node)
            return False
        return True

    def _kill(self, node: int) -> None:
        st = self.nodes[node]
        st.alive = False
        st.death_time = self.sim.clock
        self.stats["deaths"] += 1
        self.trace.record("death", node)
        self._relink(node)

    def total_energy_consumed(self) -> float:
        return sum(n.initial_pj - n.energy_pj for n in self.nodes) / PJ_PER_J

    def consumed_pj(self) -> int:
        return sum(n.initial_pj - n.energy_pj for n in self.nodes)

    # radio ----------------------------------------------------------------

    def broadcast(self, sender: int, frame: Frame) -> list[int]:
        st = self.nodes[sender]
        trace = self.trace
        if not st.alive:
            trace.record("drop", sender, why="dead-sender", frame=type(frame.payload).__name__)
            return []
        bits = frame.size_bits
        self.stats["tx"] += 1
        alive = self.charge(sender, self._tx_pj * bits, "tx", False)
        if trace.enabled:
            trace.record("tx", sender, dst="bcast", bits=bits, pkt=type(frame.payload).__name__, left=st.energy_pj)
        if not alive:
            return []
        p = self.radio.delivery_probability
        rnd = self.rng.random
        rx_cost = self._rx_pj * bits
        receivers = []
        for nb in self._sorted[sender]:
            if rnd() < p:
                self.stats["rx"] += 1
                alive = self.charge(nb, rx_cost, "rx", False)
                if trace.enabled:
                    trace.record("rx", nb, src=sender, bits=bits, left=self.nodes[nb].energy_pj)
                if alive:
                    receivers.append(nb)
        if receivers:
            self.sim.after(self.radio.latency(bits), EventKind.PACKET_ARRIVAL, sender, (frame, receivers))
        return receivers

    def unicast(self, sender: int, dest: int, frame: Frame) -> bool:
        """Send with up to ``1 + max_retransmissions`` attempts.

        Returns False (the MAC failure indication) when every attempt failed.
        """
        self._check(dest)
        st = self.nodes[sender]
        trace = self.trace
        if not st.alive:
            trace.record("drop", sender, why="dead-sender", dst=dest)
            return False
        bits = frame.size_bits
        reachable = dest in self._nbrs[sender]
        p = self.radio.delivery_probability
        latency = self.radio.latency(bits)
        tx_cost = self._tx_pj * bits
        for attempt in range(1, self.mac.max_retransmissions + 2):
            self.stats["tx"] += 1
            alive = self.charge(sender, tx_cost, "tx", False)
            if trace.enabled:
                trace.record("tx", sender, dst=dest, bits=bits, attempt=attempt,
                             pkt=type(frame.payload).__name__, left=st.energy_pj)
            if not alive:
                break
            if reachable and self.nodes[dest].alive and self.rng.random() < p:
                self.stats["rx"] += 1
                alive = self.charge(dest, self._rx_pj * bits, "rx", False)
                if trace.enabled:
                    trace.record("rx", dest, src=sender, bits=bits, left=self.nodes[dest].energy_pj)
                if not alive:
                    break
                delay = attempt * latency + (attempt - 1) * self.mac.ack_timeout
                self.sim.after(delay, EventKind.PACKET_ARRIVAL, sender, (frame, (dest,)))
                return True
        self.stats["unicast_failed"] += 1
        trace.record("drop", sender, why="mac-failure", dst=dest)
        return False

    def _on_arrival(self, event) -> None:
        frame, receivers = event.payload
        nodes = self.nodes
        proto = self.protocol
        for r in receivers:
            if nodes[r].alive:
                proto.on_packet(r, frame)

    # application traffic ----------------------------------------------------

    def generate_traffic(self, source: int, rate: float, until: float, rng: RngStream) -> None:
        """Constant-rate events from ``source`` at a random phase, while ``t < until``."""
        st = self._check(source)
        if source == self.sink_id or not st.alive:
            return
        if not rate > 0:
            raise ConfigError(f"traffic rate must be > 0, got {rate}")
        period = 1.0 / rate
        offset = rng.uniform(0.0, period)
        if offset < until:
            self.sim.at(offset, EventKind.TRAFFIC_TICK, source, (offset, period, 0, until), self._on_traffic)

    def _on_traffic(self, event) -> None:
        source = event.target
        offset, period, k, until = event.payload
        if not self.nodes[source].alive:
            return
        self.log.generated += 1
        app = AppEvent(source, k, self.sim.clock)
        self.trace.record("generate", source, seq=k)
        self.protocol.on_app_event(source, app)
        t_next = offset + (k + 1) * period
        if t_next < until:
            self.sim.at(t_next, EventKind.TRAFFIC_TICK, source, (offset, period, k + 1, until), self._on_traffic)

    def deliver(self, node: int, app: AppEvent) -> bool:
        """Record arrival of ``app`` at the sink; duplicates count once."""
        if node != self.sink_id:
            return False
        key = (app.source, app.seq)
        if key in self.log.delivered:
            return False
        self.log.delivered[key] = self.sim.clock - app.created
        self.trace.record("deliver", node, src=app.source, seq=app.seq)
        return True

    def drop_event(self, node: int, app: AppEvent, why: str) -> None:
        self.log.dropped += 1
        self.trace.record("drop", node, why=why, src=app.source, seq=app.seq)

    # sink mobility and idle drain -------------------------------------------

    def relocate_sink(self, rng: RngStream) -> tuple[float, float]:
        w, h = self.area
        pos = (rng.uniform(0.0, w), rng.uniform(0.0, h))
        self.move(self.sink_id, pos)
        self.stats["relocations"] += 1
        self.trace.record("relocate", self.sink_id, x=pos[0], y=pos[1])
        return pos

    def start_sink_motion(self, t_change: float, until: float, rng: RngStream) -> None:
        if not t_change > 0:
            raise ConfigError("t_change must be > 0")

        def tick(event):
            self.relocate_sink(rng)
            k = event.payload + 1
            if k * t_change <= until:
                self.sim.at(k * t_change, EventKind.SINK_MOVE_TICK, self.sink_id, k, tick)

        if t_change <= until:
            self.sim.at(t_change, EventKind.SINK_MOVE_TICK, self.sink_id, 1, tick)

    def start_idle_drain(self, until: float, period: float = 1.0) -> None:
        per_tick = to_pj(self.energy_cfg.idle_joules_per_second * period)
        if per_tick <= 0:
            return

        def tick(event):
            for n in self.nodes:
                if n.alive:
                    self.charge(n.id, per_tick, "idle")
            k = event.payload + 1
            if k * period <= until:
                self.sim.at(k * period, EventKind.METRIC_SAMPLE, None, k, tick)

        self.sim.at(period, EventKind.METRIC_SAMPLE, None, 1, tick)


def _inside(p: Iterable[float], area: tuple[float, float]) -> tuple[float, float]:
    x, y = p
    w, h = area
    if not (0.0 <= x <= w and 0.0 <= y <= h):
        raise ConfigError(f"position {(x, y)} outside the {w}x{h} area")
    return (float(x), float(y))


def place_nodes(
    n: int,
    area: tuple[float, float],
    sink_position: tuple[float, float],
    radio_range: float,
    rng: RngStream,
    connected: bool = True,
    max_tries: int = 10_000,
) -> list[tuple[float, float]]:
    """Uniform random sensor placement; node 0 is the sink.

    With ``connected`` the whole layout is redrawn until every node has a
    multi-hop path to the sink.
    """
    if n < 2:
        raise ConfigError("need at least two nodes (one source and the sink)")
    w, h = area
    for _ in range(max_tries):
        pts = [tuple(sink_position)] + [(rng.uniform(0, w), rng.uniform(0, h)) for _ in range(n - 1)]
        if not connected or _is_connected(pts, radio_range):
            return pts
    raise ConfigError(f"could not draw a connected placement of {n} nodes in {max_tries} tries")


def _is_connected(pts, r) -> bool:
    r2 = r * r
    seen = {0}
    stack = [0]
    while stack:
        a = stack.pop()
        ax, ay = pts[a]
        for b, (bx, by) in enumerate(pts):
            if b not in seen and (ax - bx) ** 2 + (ay - by) ** 2 <= r2:
                seen.add(b)
                stack.append(b)
    return len(seen) == len(pts)
