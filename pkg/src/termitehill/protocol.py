"""Common routing-protocol surface used by the experiment harness."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError
from .network import AppEvent, Frame, Network
from .sim import EventKind, RngStream


@dataclass
class ProtocolParams:
    """Tunables for every protocol; each protocol reads the fields it needs."""

    alpha: float = 0.0
    beta: float = 2.0
    decay_mode: str = "exponential"
    rho: float = 0.1
    linear_x: float = 0.1
    decay_period: float = 1.0
    hmax: int = 10
    p_sf: float = 0.5
    pheromone_initial: float = 1.0
    pheromone_floor: float = 0.05
    pheromone_ceiling: float = 10.0
    event_cache_size: int = 32
    discovery_timeout: float = 1.0
    max_discovery_attempts: int = 3
    reward_energy_unit: float = 1e-3
    gamma_max: float | None = None
    fs_bytes: int = 20
    bs_bytes: int = 20
    worker_bytes: int = 40
    beacon_bytes: int = 12
    sc_refresh_period: float = 30.0
    ff_slack: int = 1
    ff_ack_timeout: float = 1.0
    reinforcement: float = 0.3

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if not 0 <= self.beta <= 2:
            raise ConfigError("beta must lie in [0, 2]")
        if self.decay_mode not in ("exponential", "linear"):
            raise ConfigError(f"decay_mode must be exponential or linear, got {self.decay_mode!r}")
        if self.rho < 0:
            raise ConfigError("rho must be >= 0")
        if not 0 <= self.linear_x <= 1:
            raise ConfigError("linear_x must lie in [0, 1]")
        if not self.decay_period > 0:
            raise ConfigError("decay_period must be > 0")
        if self.hmax < 0:
            raise ConfigError("hmax must be >= 0")
        if not 0 <= self.p_sf <= 1:
            raise ConfigError("p_sf must lie in [0, 1]")
        if not 0 <= self.pheromone_floor <= self.pheromone_initial <= self.pheromone_ceiling:
            raise ConfigError("pheromone limits need floor <= initial <= ceiling")
        if self.event_cache_size < 1:
            raise ConfigError("event_cache_size must be >= 1")
        if not self.discovery_timeout > 0 or self.max_discovery_attempts < 1:
            raise ConfigError("discovery_timeout must be > 0 and max_discovery_attempts >= 1")
        if not self.reward_energy_unit > 0:
            raise ConfigError("reward_energy_unit must be > 0")
        for name in ("fs_bytes", "bs_bytes", "worker_bytes", "beacon_bytes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.sc_refresh_period > 0 or self.ff_slack < 0 or not self.ff_ack_timeout > 0:
            raise ConfigError("sc_refresh_period, ff_slack and ff_ack_timeout out of range")
        if not 0 < self.reinforcement < 1:
            raise ConfigError("reinforcement must lie in (0, 1)")

    @classmethod
    def names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @property
    def decay_rate(self) -> float:
        return self.rho if self.decay_mode == "exponential" else self.linear_x


class Protocol:
    """Per-run protocol instance holding the state of every node.

    The network calls :meth:`on_packet` for each received frame and
    :meth:`on_app_event` for each generated phenomenon.
    """

    name = "base"

    def __init__(self, net: Network, params: ProtocolParams, rng: RngStream, duration: float):
        self.net = net
        self.sim = net.sim
        self.params = params
        self.rng = rng
        self.duration = duration
        self.sink = net.sink_id
        self.trace = net.trace
        net.protocol = self

    def start(self) -> None:
        """Schedule periodic activity; called once before traffic starts."""
        p = self.params.decay_period
        if p <= self.duration:
            self.sim.at(p, EventKind.DECAY_TICK, None, 1, self._decay_tick)

    def _decay_tick(self, event) -> None:
        self.on_decay_tick(self.sim.clock)
        k = event.payload + 1
        t = k * self.params.decay_period
        if t <= self.duration:
            self.sim.at(t, EventKind.DECAY_TICK, None, k, self._decay_tick)

    def on_app_event(self, node: int, event: AppEvent) -> None:
        raise NotImplementedError

    def on_packet(self, node: int, frame: Frame) -> None:
        raise NotImplementedError

    def on_decay_tick(self, now: float) -> None:
        pass

    def on_mac_failure(self, node: int, dest: int, packet) -> None:
        pass

    # helpers
    def send(self, node: int, dest: int, packet, size_bytes: int) -> bool:
        ok = self.net.unicast(node, dest, Frame(node, dest, 8 * size_bytes, packet))
        if not ok:
            self.on_mac_failure(node, dest, packet)
        return ok

    def flood(self, node: int, packet, size_bytes: int) -> list[int]:
        return self.net.broadcast(node, Frame(node, -1, 8 * size_bytes, packet))

    def timer(self, delay: float, node: int, action, payload=None) -> None:
        self.sim.after(delay, EventKind.TIMER, node, payload, action)


_REGISTRY: dict[str, type[Protocol]] = {}


def register(cls: type[Protocol]) -> type[Protocol]:
    _REGISTRY[cls.name] = cls
    return cls


def protocol_class(name: str) -> type[Protocol]:
    from . import baselines, termite_hill  # noqa: F401  (populate registry)

    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown protocol {name!r}; choose from {sorted(_REGISTRY)}") from None


def protocol_names() -> list[str]:
    from . import baselines, termite_hill  # noqa: F401

    return sorted(_REGISTRY)
