"""Comparator protocols, reduced to the behaviour needed for trend comparisons.

* ``ff``   flooded forward ants: every event floods toward the sink; a
  backward ant reinforces the reverse path and tells the source how far
  the sink is, which bounds later floods.
* ``sc``   sensor-driven cost-aware routing: a sink-rooted hop-count field,
  refreshed periodically, steers events downhill.
* ``aodv`` on-demand RREQ/RREP discovery with RERR on link failure; no
  sequence numbers, no HELLO beacons.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .network import AppEvent, Frame
from .protocol import Protocol, register


# --------------------------------------------------------------------------- FF

class Ant:
    __slots__ = ("origin", "seq", "hops", "ttl", "payload")

    def __init__(self, origin, seq, hops, ttl, payload):
        self.origin = origin
        self.seq = seq
        self.hops = hops
        self.ttl = ttl
        self.payload = payload


class BackwardAnt:
    __slots__ = ("origin", "seq", "hops", "sender", "distance")

    def __init__(self, origin, seq, hops, sender, distance):
        self.origin = origin
        self.seq = seq
        self.hops = hops  # total source-to-sink hops of the flooded copy
        self.sender = sender
        self.distance = distance  # hops from ``sender`` to the sink


@dataclass
class FFNode:
    seen: dict = field(default_factory=dict)  # (origin, seq) -> previous hop
    probs: dict = field(default_factory=dict)  # neighbor -> probability toward the sink
    best_hops: int | None = None
    acked: dict = field(default_factory=dict)  # own seq -> fewest hops reported
    pending: dict = field(default_factory=dict)  # own seq -> (event, retried)


@register
class FloodedForward(Protocol):
    name = "ff"

    def __init__(self, net, params, rng, duration):
        super().__init__(net, params, rng, duration)
        self.state = [FFNode() for _ in range(len(net))]
        self._bits = 8 * params.worker_bytes
        self.counts = {"ants": 0, "rebroadcasts": 0, "backward": 0, "retries": 0}

    def ttl_for(self, node: int) -> int:
        st = self.state[node]
        if st.best_hops is None:
            return len(self.net)
        return st.best_hops + self.params.ff_slack

    def _flood_event(self, node: int, event: AppEvent, ttl: int, retried: bool) -> None:
        st = self.state[node]
        st.seen[(node, event.seq, retried)] = node
        st.pending[event.seq] = (event, retried)
        self.counts["ants"] += 1
        self.net.broadcast(node, Frame(node, -1, self._bits, Ant(node, (event.seq, retried), 0, ttl, event)))
        self.timer(self.params.ff_ack_timeout, node, self._ack_check, event.seq)

    def on_app_event(self, node: int, event: AppEvent) -> None:
        self._flood_event(node, event, self.ttl_for(node), False)

    def _ack_check(self, event) -> None:
        node, seq = event.target, event.payload
        st = self.state[node]
        entry = st.pending.pop(seq, None)
        if entry is None or seq in st.acked:
            return
        # the scoped flood missed the sink: forget the scope and, once,
        # flood this event again across the whole network
        st.best_hops = None
        app, retried = entry
        if not retried and self.net.alive(node):
            self.counts["retries"] += 1
            self._flood_event(node, app, len(self.net), True)

    def on_packet(self, node: int, frame: Frame) -> None:
        pkt = frame.payload
        if type(pkt) is Ant:
            self._on_ant(node, pkt, frame.sender)
        else:
            self._on_backward(node, pkt)

    def _on_ant(self, node: int, ant: Ant, sender: int) -> None:
        st = self.state[node]
        key = (ant.origin, *ant.seq)
        if key in st.seen:
            return
        st.seen[key] = sender
        hops = ant.hops + 1
        if node == self.sink:
            self.net.deliver(node, ant.payload)
            self.counts["backward"] += 1
            self.net.unicast(node, sender, Frame(node, sender, 8 * self.params.bs_bytes,
                                                 BackwardAnt(ant.origin, ant.seq, hops, node, 0)))
            return
        if hops < ant.ttl:
            self.counts["rebroadcasts"] += 1
            self.net.broadcast(node, Frame(node, -1, self._bits, Ant(ant.origin, ant.seq, hops, ant.ttl, ant.payload)))

    def _on_backward(self, node: int, ba: BackwardAnt) -> None:
        st = self.state[node]
        self._reinforce(st, ba.sender, ba.distance + 1)
        if node == ba.origin:
            seq = ba.seq[0]
            if seq not in st.acked or ba.hops < st.acked[seq]:
                st.acked[seq] = ba.hops
                st.best_hops = ba.hops
            return
        prev = st.seen.get((ba.origin, *ba.seq))
        if prev is None or prev == node:
            return
        self.net.unicast(node, prev, Frame(node, prev, 8 * self.params.bs_bytes,
                                           BackwardAnt(ba.origin, ba.seq, ba.hops, node, ba.distance + 1)))

    def _reinforce(self, st: FFNode, via: int, distance: int) -> None:
        r = self.params.reinforcement / distance
        probs = st.probs
        for n in probs:
            probs[n] *= 1.0 - r
        probs[via] = probs.get(via, 0.0) + r
        total = math.fsum(probs.values())
        for n in probs:
            probs[n] /= total

    def on_decay_tick(self, now: float) -> None:
        # duplicate suppression only has to outlive one flood
        for st in self.state:
            if len(st.seen) > 4096:
                st.seen = dict(list(st.seen.items())[-1024:])


# --------------------------------------------------------------------------- SC

class CostBeacon:
    __slots__ = ("round", "cost")

    def __init__(self, round_, cost):
        self.round = round_
        self.cost = cost


class Data:
    __slots__ = ("origin", "payload", "hops", "sender")

    def __init__(self, origin, payload, hops, sender):
        self.origin = origin
        self.payload = payload
        self.hops = hops
        self.sender = sender


@dataclass
class SCNode:
    round: int = -1
    nb_cost: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return 1 + min(self.nb_cost.values()) if self.nb_cost else math.inf


@register
class SensorCost(Protocol):
    name = "sc"

    def __init__(self, net, params, rng, duration):
        super().__init__(net, params, rng, duration)
        self.state = [SCNode() for _ in range(len(net))]
        self._bits = 8 * params.worker_bytes
        self._beacon_bits = 8 * params.beacon_bytes
        self.rounds = 0
        self.counts = {"dropped_no_route": 0, "ttl_expired": 0}

    def start(self) -> None:
        super().start()
        self.refresh()
        period = self.params.sc_refresh_period

        def again(event):
            self.refresh()
            k = event.payload + 1
            if k * period <= self.duration:
                self.timer(period, self.sink, again, k)

        if period <= self.duration:
            self.timer(period, self.sink, again, 1)

    def refresh(self) -> None:
        """Sink-rooted hop-count flood."""
        self.rounds += 1
        self.state[self.sink].round = self.rounds
        self.net.broadcast(self.sink, Frame(self.sink, -1, self._beacon_bits, CostBeacon(self.rounds, 0)))

    def cost(self, node: int) -> float:
        return 0 if node == self.sink else self.state[node].cost

    def candidates(self, node: int) -> dict:
        """Downhill neighbours and their selection probabilities."""
        st = self.state[node]
        own = self.cost(node)
        weights = {n: 1.0 / (1.0 + c) for n, c in sorted(st.nb_cost.items()) if c < own}
        if not weights:
            return {}
        total = math.fsum(weights.values())
        return {n: w / total for n, w in weights.items()}

    def on_app_event(self, node: int, event: AppEvent) -> None:
        self._forward(node, Data(node, event, 0, node))

    def on_packet(self, node: int, frame: Frame) -> None:
        pkt = frame.payload
        if type(pkt) is CostBeacon:
            self._on_beacon(node, pkt, frame.sender)
        elif node == self.sink:
            self.net.deliver(node, pkt.payload)
        else:
            self._forward(node, pkt)

    def _on_beacon(self, node: int, b: CostBeacon, sender: int) -> None:
        if node == self.sink:
            return
        st = self.state[node]
        if b.round > st.round:
            st.round = b.round
            st.nb_cost = {sender: b.cost}
            self.net.broadcast(node, Frame(node, -1, self._beacon_bits, CostBeacon(b.round, st.cost)))
        elif b.round == st.round:
            st.nb_cost[sender] = b.cost

    def _forward(self, node: int, data: Data) -> None:
        if data.hops > 2 * len(self.net):
            self.counts["ttl_expired"] += 1
            self.net.drop_event(node, data.payload, "ttl")
            return
        st = self.state[node]
        while True:
            cands = self.candidates(node)
            if not cands:
                self.counts["dropped_no_route"] += 1
                self.net.drop_event(node, data.payload, "no-downhill-neighbor")
                return
            keys = list(cands)
            nxt = keys[self.rng.categorical([cands[k] for k in keys])]
            pkt = Data(data.origin, data.payload, data.hops + 1, node)
            if self.net.unicast(node, nxt, Frame(node, nxt, self._bits, pkt)):
                return
            self.on_mac_failure(node, nxt, pkt)

    def on_mac_failure(self, node: int, dest: int, packet) -> None:
        self.state[node].nb_cost[dest] = math.inf


# ------------------------------------------------------------------------- AODV

class RREQ:
    __slots__ = ("origin", "rreq_id", "hops")

    def __init__(self, origin, rreq_id, hops):
        self.origin = origin
        self.rreq_id = rreq_id
        self.hops = hops


class RREP:
    __slots__ = ("origin", "rreq_id", "hop_count")

    def __init__(self, origin, rreq_id, hop_count):
        self.origin = origin
        self.rreq_id = rreq_id
        self.hop_count = hop_count  # hops from the receiver of this RREP to the sink


class RERR:
    __slots__ = ("origin",)

    def __init__(self, origin):
        self.origin = origin


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    valid: bool = True


@dataclass
class AodvNode:
    routes: dict = field(default_factory=dict)  # destination -> RouteEntry
    reverse: dict = field(default_factory=dict)  # (origin, rreq_id) -> previous hop
    upstream: dict = field(default_factory=dict)  # origin -> last node that handed us its data
    buffer: deque = field(default_factory=deque)
    pending: int | None = None
    attempts: int = 0
    rreq_id: int = 0


@register
class AodvLite(Protocol):
    name = "aodv"

    def __init__(self, net, params, rng, duration):
        super().__init__(net, params, rng, duration)
        self.state = [AodvNode() for _ in range(len(net))]
        self._bits = 8 * params.worker_bytes
        self.counts = {"rreq": 0, "rreq_rebroadcast": 0, "rrep": 0, "rerr": 0, "hello": 0, "timeouts": 0}

    def route(self, node: int) -> RouteEntry | None:
        r = self.state[node].routes.get(self.sink)
        return r if r is not None and r.valid else None

    def on_app_event(self, node: int, event: AppEvent) -> None:
        self._send_data(node, Data(node, event, 0, node))

    def _send_data(self, node: int, data: Data) -> None:
        st = self.state[node]
        r = self.route(node)
        if r is not None:
            pkt = Data(data.origin, data.payload, data.hops + 1, node)
            if self.net.unicast(node, r.next_hop, Frame(node, r.next_hop, self._bits, pkt)):
                return
            r.valid = False
            if node != data.origin:
                self.net.drop_event(node, data.payload, "link-break")
                self._send_rerr(node, data.origin)
                return
        if node != data.origin:
            self.net.drop_event(node, data.payload, "no-route")
            self._send_rerr(node, data.origin)
            return
        if len(st.buffer) >= self.params.event_cache_size:
            self.net.drop_event(node, st.buffer.popleft().payload, "buffer-overflow")
        st.buffer.append(data)
        if st.pending is None:
            self._discover(node)

    def _discover(self, node: int) -> None:
        st = self.state[node]
        st.rreq_id += 1
        st.attempts += 1
        st.pending = st.rreq_id
        st.reverse[(node, st.rreq_id)] = node
        self.counts["rreq"] += 1
        self.flood(node, RREQ(node, st.rreq_id, 0), self.params.fs_bytes)
        self.timer(self.params.discovery_timeout, node, self._timeout, st.rreq_id)

    def _timeout(self, event) -> None:
        node, rid = event.target, event.payload
        st = self.state[node]
        if st.pending != rid:
            return
        st.pending = None
        self.counts["timeouts"] += 1
        if st.attempts < self.params.max_discovery_attempts and self.net.alive(node):
            self._discover(node)
            return
        st.attempts = 0
        while st.buffer:
            self.net.drop_event(node, st.buffer.popleft().payload, "discovery-timeout")

    def on_packet(self, node: int, frame: Frame) -> None:
        pkt = frame.payload
        kind = type(pkt)
        if kind is Data:
            if node == self.sink:
                self.net.deliver(node, pkt.payload)
            else:
                self.state[node].upstream[pkt.origin] = frame.sender
                self._send_data(node, pkt)
        elif kind is RREQ:
            self._on_rreq(node, pkt, frame.sender)
        elif kind is RREP:
            self._on_rrep(node, pkt, frame.sender)
        elif kind is RERR:
            self._on_rerr(node, pkt)

    def _on_rreq(self, node: int, q: RREQ, sender: int) -> None:
        st = self.state[node]
        key = (q.origin, q.rreq_id)
        if key in st.reverse:
            return
        st.reverse[key] = sender
        if node == self.sink:
            self.counts["rrep"] += 1
            self._unicast(node, sender, RREP(q.origin, q.rreq_id, 1), self.params.bs_bytes)
            return
        self.counts["rreq_rebroadcast"] += 1
        self.flood(node, RREQ(q.origin, q.rreq_id, q.hops + 1), self.params.fs_bytes)

    def _on_rrep(self, node: int, p: RREP, sender: int) -> None:
        st = self.state[node]
        st.routes[self.sink] = RouteEntry(self.sink, sender, p.hop_count)
        if node == p.origin:
            if st.pending == p.rreq_id:
                st.pending = None
                st.attempts = 0
            buffered, st.buffer = st.buffer, deque()
            for data in buffered:
                self._send_data(node, data)
            return
        prev = st.reverse.get((p.origin, p.rreq_id))
        if prev is not None:
            self._unicast(node, prev, RREP(p.origin, p.rreq_id, p.hop_count + 1), self.params.bs_bytes)

    def _send_rerr(self, node: int, origin: int) -> None:
        up = self.state[node].upstream.get(origin)
        if up is not None and up != node:
            self.counts["rerr"] += 1
            self._unicast(node, up, RERR(origin), self.params.beacon_bytes)

    def _on_rerr(self, node: int, e: RERR) -> None:
        r = self.state[node].routes.get(self.sink)
        if r is not None:
            r.valid = False
        if node != e.origin:
            self._send_rerr(node, e.origin)

    def _unicast(self, node, dest, pkt, size_bytes) -> bool:
        ok = self.net.unicast(node, dest, Frame(node, dest, 8 * size_bytes, pkt))
        if not ok:
            self.on_mac_failure(node, dest, pkt)
        return ok

    def on_mac_failure(self, node: int, dest: int, packet) -> None:
        r = self.state[node].routes.get(self.sink)
        if r is not None and r.next_hop == dest:
            r.valid = False
