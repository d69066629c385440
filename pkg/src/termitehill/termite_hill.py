"""Termite-hill routing: soldier-based route discovery, pheromone-weighted
path choice at the source and table-switched worker forwarding.

Path identifiers are the ``(source, soldier counter)`` pair of the forward
soldier that discovered the path.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .network import AppEvent, Frame
from .pheromone import PheromoneLimits, PheromoneTable, compute_reward, decay_factor, probabilities, sample_path
from .protocol import Protocol, register

log = logging.getLogger(__name__)


class ForwardSoldier:
    __slots__ = ("source_id", "soldier_id", "hops", "min_energy", "energy_sum", "energy_count", "sender", "payload")

    def __init__(self, source_id, soldier_id, hops, min_energy, energy_sum, energy_count, sender, payload=None):
        self.source_id = source_id
        self.soldier_id = soldier_id
        self.hops = hops
        self.min_energy = min_energy
        self.energy_sum = energy_sum
        self.energy_count = energy_count
        self.sender = sender
        self.payload = payload

    @property
    def key(self):
        return (self.source_id, self.soldier_id)

    @property
    def av_energy(self) -> float:
        return self.energy_sum / self.energy_count

    def visited(self, node: int, energy: float) -> "ForwardSoldier":
        """The copy this soldier becomes after one more hop, at ``node``."""
        return ForwardSoldier(
            self.source_id, self.soldier_id, self.hops + 1,
            min(self.min_energy, energy), self.energy_sum + energy, self.energy_count + 1,
            node, self.payload,
        )

    def __repr__(self):
        return f"FS({self.source_id}:{self.soldier_id} hops={self.hops} from={self.sender})"


class BackwardSoldier:
    __slots__ = ("sink_id", "path_id", "reward", "sender")

    def __init__(self, sink_id, path_id, reward, sender):
        self.sink_id = sink_id
        self.path_id = path_id
        self.reward = reward
        self.sender = sender

    def __repr__(self):
        return f"BS({self.path_id} reward={self.reward:.6g} from={self.sender})"


class Worker:
    __slots__ = ("path_id", "payload", "source_id", "hops")

    def __init__(self, path_id, payload: AppEvent, source_id, hops=0):
        self.path_id = path_id
        self.payload = payload
        self.source_id = source_id
        self.hops = hops

    def __repr__(self):
        return f"Worker({self.path_id}, {self.payload!r})"


class Beacon:
    __slots__ = ("sink_id", "path_id", "pheromone", "sender")

    def __init__(self, sink_id, path_id, pheromone, sender):
        self.sink_id = sink_id
        self.path_id = path_id
        self.pheromone = pheromone
        self.sender = sender


@dataclass
class SoldierCacheEntry:
    from_: int
    source_id: int
    soldier_id: int
    bflag: bool
    reward: float
    created: float = 0.0
    consumed: bool = False
    hops: int = 0  # hop count of the first copy, as rebroadcast from here


@dataclass
class AdoptedRoute:
    via: int
    path_id: tuple
    strength: float


@dataclass
class NodeRouting:
    table: PheromoneTable
    paths: dict = field(default_factory=dict)  # destination -> {first hop: path_id}
    forwarding: dict = field(default_factory=dict)  # path_id -> next hop toward the sink
    soldier_cache: dict = field(default_factory=dict)
    cache: deque = field(default_factory=deque)
    carried: dict = field(default_factory=dict)  # soldier key -> payload riding on it
    adopted: dict = field(default_factory=dict)  # destination -> AdoptedRoute
    discovering: tuple | None = None
    attempts: int = 0
    counter: int = 0
    answered: set = field(default_factory=set)
    workers_received: int = 0


@register
class TermiteHill(Protocol):
    name = "termite-hill"

    def __init__(self, net, params, rng, duration):
        super().__init__(net, params, rng, duration)
        limits = PheromoneLimits(params.pheromone_initial, params.pheromone_floor, params.pheromone_ceiling)
        self.limits = limits
        self.state = [NodeRouting(PheromoneTable(limits)) for _ in range(len(net))]
        unit = params.reward_energy_unit
        self._unit = unit
        self._e_init = net.energy_cfg.initial_energy / unit
        self._n = len(net)
        self.gamma_max = params.gamma_max if params.gamma_max is not None else 10.0 * self._n / self._e_init
        self._worker_bits = 8 * params.worker_bytes
        self._decay = decay_factor(params.decay_mode, params.decay_rate)
        # hop budget of one payload, salvage detours included
        self.worker_ttl = 2 * max(params.hmax, 1)
        self.counts = dict.fromkeys(
            ("fs_launched", "fs_rebroadcast", "fs_beyond_hmax", "bs_sent", "bs_dropped",
             "beacons", "workers_sent", "route_failures", "mac_failures", "worker_ttl"), 0)

    # reward -----------------------------------------------------------------

    def _energy(self, node: int) -> float:
        return self.net.energy(node) / self._unit

    def reward(self, fs: ForwardSoldier) -> float:
        return compute_reward(self._n, self._e_init, fs.min_energy, fs.av_energy, fs.hops, self.gamma_max)

    # application side ---------------------------------------------------------

    def on_app_event(self, node: int, event: AppEvent) -> None:
        self._route_or_discover(node, event)

    def _route_or_discover(self, node: int, app: AppEvent, hops: int = 0) -> None:
        if self._dispatch(node, app, hops):
            return
        self._enqueue(node, app)
        if self.state[node].discovering is None:
            self._launch(node)

    def _enqueue(self, node: int, app: AppEvent) -> None:
        cache = self.state[node].cache
        if len(cache) >= self.params.event_cache_size:
            self.net.drop_event(node, cache.popleft(), "cache-overflow")
        cache.append(app)

    def usable_routes(self, node: int) -> dict:
        """First hop -> path id for every pheromone-backed route to the sink."""
        st = self.state[node]
        paths = st.paths.get(self.sink)
        if not paths:
            return {}
        col = st.table.column(self.sink)
        return {n: pid for n, pid in sorted(paths.items()) if n in col}

    def _choose(self, node: int):
        st = self.state[node]
        routes = self.usable_routes(node)
        if routes:
            col = st.table.column(self.sink)
            probs = probabilities({n: col[n] for n in routes}, self.params.alpha, self.params.beta)
            hop = sample_path(probs, self.rng)
            return hop, routes[hop]
        ad = st.adopted.get(self.sink)
        if ad is not None:
            return ad.via, ad.path_id
        return None

    def _dispatch(self, node: int, app: AppEvent, hops: int = 0) -> bool:
        """Put ``app`` on a worker along one of this node's routes; ``hops``
        is how far the payload has come already."""
        if node == self.sink:
            self.net.deliver(node, app)
            return True
        while True:
            choice = self._choose(node)
            if choice is None:
                return False
            hop, pid = choice
            self.counts["workers_sent"] += 1
            w = Worker(pid, app, node, hops)
            if self.net.unicast(node, hop, Frame(node, hop, self._worker_bits, w)):
                return True
            self.counts["mac_failures"] += 1
            self._drop_link(node, hop)

    def _launch(self, node: int) -> None:
        st = self.state[node]
        st.counter += 1
        st.attempts += 1
        key = (node, st.counter)
        st.discovering = key
        e = self._energy(node)
        payload = st.cache[0] if st.cache else None
        if payload is not None:
            st.carried[key] = payload
        fs = ForwardSoldier(node, st.counter, 0, e, e, 1, node, payload)
        self.counts["fs_launched"] += 1
        self.trace.record("fs-launch", node, soldier=st.counter)
        self.flood(node, fs, self.params.fs_bytes)
        self.timer(self.params.discovery_timeout, node, self._discovery_timeout, key)

    def _discovery_timeout(self, event) -> None:
        node, key = event.target, event.payload
        st = self.state[node]
        if st.discovering != key:
            return
        st.discovering = None
        st.carried.pop(key, None)
        if not st.cache or not self.net.alive(node):
            st.attempts = 0
            return
        if self._drain(node):
            return
        if st.attempts < self.params.max_discovery_attempts:
            self._launch(node)
        else:
            # give up for now; the next phenomenon here starts a fresh round
            st.attempts = 0

    def _drain(self, node: int) -> bool:
        """Send cached events FIFO; True once the cache is empty."""
        cache = self.state[node].cache
        while cache:
            app = cache.popleft()
            if not self._dispatch(node, app):
                cache.appendleft(app)
                return False
        return True

    # packets ----------------------------------------------------------------

    def on_packet(self, node: int, frame: Frame) -> None:
        pkt = frame.payload
        kind = type(pkt)
        if kind is ForwardSoldier:
            self.on_forward_soldier(node, pkt)
        elif kind is Worker:
            self.on_worker(node, pkt)
        elif kind is BackwardSoldier:
            self.on_backward_soldier(node, pkt)
        elif kind is Beacon:
            self.on_beacon(node, pkt)
        else:
            self.trace.record("drop", node, why="malformed")

    def on_forward_soldier(self, node: int, fs: ForwardSoldier) -> None:
        if fs.source_id == node:
            return
        st = self.state[node]
        key = fs.key
        if node == self.sink:
            if fs.payload is not None:
                self.net.deliver(node, fs.payload)
            if key in st.answered:
                return
            st.answered.add(key)
            here = fs.visited(node, self._energy(node))
            st.forwarding[key] = fs.sender
            bs = BackwardSoldier(node, key, self.reward(here), node)
            self._send_control(node, fs.sender, bs, self.params.bs_bytes)
            self.counts["bs_sent"] += 1
            return
        entry = st.soldier_cache.get(key)
        if entry is None:
            here = fs.visited(node, self._energy(node))
            if here.hops <= self.params.hmax:
                bflag = True
            else:
                bflag = self.rng.bernoulli(self.params.p_sf)
            st.soldier_cache[key] = SoldierCacheEntry(
                fs.sender, fs.source_id, fs.soldier_id, bflag, self.reward(here), self.sim.clock,
                hops=here.hops)
            if bflag:
                self.counts["fs_rebroadcast"] += 1
                if here.hops > self.params.hmax:
                    self.counts["fs_beyond_hmax"] += 1
                self.flood(node, here, self.params.fs_bytes)
        elif entry.bflag and not entry.consumed and fs.hops < entry.hops:
            # only senders strictly nearer the source may become the reverse
            # hop, which keeps every reverse chain loop-free
            gamma = self.reward(fs.visited(node, self._energy(node)))
            if gamma > entry.reward:
                entry.from_ = fs.sender
                entry.reward = gamma

    def on_backward_soldier(self, node: int, bs: BackwardSoldier) -> None:
        st = self.state[node]
        pid = bs.path_id
        if node == pid[0]:
            r = bs.sender
            if not self.net.is_neighbor(node, r):
                self.trace.record("drop", node, why="bs-from-non-neighbor", via=r)
                return
            value = st.table.deposit(r, bs.sink_id, bs.reward)
            st.paths.setdefault(bs.sink_id, {})[r] = pid
            st.forwarding[pid] = r
            st.adopted.pop(bs.sink_id, None)
            st.discovering = None
            st.attempts = 0
            carried = st.carried.pop(pid, None)
            if carried is not None:
                try:
                    st.cache.remove(carried)
                except ValueError:
                    pass
            self.trace.record("path", node, path=f"{pid[0]}:{pid[1]}", via=r, reward=bs.reward)
            self.counts["beacons"] += 1
            self.flood(node, Beacon(bs.sink_id, pid, value, node), self.params.beacon_bytes)
            if not self._drain(node) and st.discovering is None:
                self._launch(node)
            return
        entry = st.soldier_cache.get(pid)
        if entry is None or entry.consumed:
            self.counts["bs_dropped"] += 1
            return
        st.forwarding[pid] = bs.sender
        entry.consumed = True
        self._send_control(node, entry.from_, BackwardSoldier(bs.sink_id, pid, bs.reward, node),
                           self.params.bs_bytes)

    def on_beacon(self, node: int, b: Beacon) -> None:
        if node == self.sink or node == b.path_id[0]:
            return
        st = self.state[node]
        if self.usable_routes(node):
            return
        st.adopted[b.sink_id] = AdoptedRoute(b.sender, b.path_id, b.pheromone)
        if st.cache:
            self._drain(node)

    def on_worker(self, node: int, w: Worker) -> None:
        st = self.state[node]
        if node == self.sink:
            self.net.deliver(node, w.payload)
            st.workers_received += 1
            return
        hops = w.hops + 1
        if hops >= self.worker_ttl:
            self.counts["worker_ttl"] += 1
            self.net.drop_event(node, w.payload, "worker-ttl")
            return
        hop = st.forwarding.get(w.path_id)
        if hop is None:
            self.counts["route_failures"] += 1
            self.trace.record("route-failure", node, path=f"{w.path_id[0]}:{w.path_id[1]}")
            self._salvage(node, w.payload)
            return
        self.counts["workers_sent"] += 1
        w = Worker(w.path_id, w.payload, w.source_id, hops)
        if not self.net.unicast(node, hop, Frame(node, hop, self._worker_bits, w)):
            self.counts["mac_failures"] += 1
            self.on_mac_failure(node, hop, w)

    def on_mac_failure(self, node: int, dest: int, packet) -> None:
        self._drop_link(node, dest)
        if isinstance(packet, Worker):
            if node == packet.source_id:
                self._route_or_discover(node, packet.payload, packet.hops)
            else:
                self._salvage(node, packet.payload)

    def _salvage(self, node: int, app: AppEvent) -> None:
        """Take over a payload whose path broke at this relay.

        The payload waits here while this node discovers a fresh route as
        if it were the source; the forward soldier carries it to the sink.
        """
        st = self.state[node]
        self._enqueue(node, app)
        if st.discovering is None:
            self._launch(node)

    def _drop_link(self, node: int, dest: int) -> None:
        st = self.state[node]
        st.forwarding = {pid: hop for pid, hop in st.forwarding.items() if hop != dest}
        st.table.remove_neighbor(dest)
        for paths in st.paths.values():
            paths.pop(dest, None)
        for d in [d for d, ad in st.adopted.items() if ad.via == dest]:
            del st.adopted[d]
        self.trace.record("link-lost", node, nb=dest)

    def _send_control(self, node, dest, pkt, size_bytes) -> None:
        if not self.net.unicast(node, dest, Frame(node, dest, 8 * size_bytes, pkt)):
            self.counts["mac_failures"] += 1
            self.on_mac_failure(node, dest, pkt)

    # maintenance -----------------------------------------------------------

    def on_decay_tick(self, now: float) -> None:
        mode, rate = self.params.decay_mode, self.params.decay_rate
        floor = self.limits.floor
        horizon = now - 10 * self.params.discovery_timeout
        net = self.net
        for node, st in enumerate(self.state):
            if st.table:
                st.table.evaporate(mode, rate)
                lost = [n for n in st.table.neighbors if not net.is_neighbor(node, n)]
                st.table.prune(lost)
                for d, paths in st.paths.items():
                    col = st.table.column(d)
                    for n in [n for n in paths if n not in col]:
                        del paths[n]
            if st.adopted:
                for d in list(st.adopted):
                    ad = st.adopted[d]
                    ad.strength *= self._decay
                    if ad.strength <= floor or not net.is_neighbor(node, ad.via):
                        del st.adopted[d]
            if st.soldier_cache:
                stale = [k for k, e in st.soldier_cache.items() if e.created < horizon]
                for k in stale:
                    del st.soldier_cache[k]

    def dump_tables(self) -> None:
        """Write every node's pheromone and probability rows to the trace."""
        for node, st in enumerate(self.state):
            for d in st.table.destinations:
                col = st.table.column(d)
                if not col:
                    continue
                probs = probabilities(col, self.params.alpha, self.params.beta)
                for n, v in col.items():
                    self.trace.record("pheromone", node, nb=n, dst=d, t=v, p=probs[n])

    def installed_path(self, path_id) -> list[int]:
        """Follow forwarding entries for ``path_id`` from its source to the sink."""
        node = path_id[0]
        path = [node]
        seen = {node}
        while node != self.sink:
            node = self.state[node].forwarding.get(path_id)
            if node is None or node in seen:
                raise LookupError(f"path {path_id} broken or looping at {path}")
            path.append(node)
            seen.add(node)
        return path
