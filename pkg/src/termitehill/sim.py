"""Discrete-event kernel and seeded random streams.

Events are ordered by ``(fire_time, sequence)``; the sequence number is
assigned when the event is scheduled, so two events at the same instant
fire in the order they were scheduled.
"""

from __future__ import annotations

import enum
import heapq
import random
from typing import Any, Callable, Sequence

from .errors import ConfigError, SchedulingError


class EventKind(enum.Enum):
    PACKET_ARRIVAL = "packet-arrival"
    DECAY_TICK = "decay-tick"
    TRAFFIC_TICK = "traffic-tick"
    SINK_MOVE_TICK = "sink-move-tick"
    WORLD_STEP = "world-step"
    METRIC_SAMPLE = "metric-sample"
    TIMER = "timer"


class SimEvent:
    __slots__ = ("fire_time", "sequence", "target", "kind", "payload", "action")

    def __init__(
        self,
        fire_time: float,
        kind: EventKind,
        target: Any = None,
        payload: Any = None,
        action: Callable[["SimEvent"], None] | None = None,
    ):
        self.fire_time = fire_time
        self.sequence: int | None = None
        self.target = target
        self.kind = kind
        self.payload = payload
        self.action = action

    def __repr__(self) -> str:
        return f"SimEvent({self.fire_time:g}, #{self.sequence}, {self.kind.value}, target={self.target!r})"


class Simulator:
    """Single-threaded event loop.

    Handlers are registered per :class:`EventKind`; an event carrying its own
    ``action`` callable bypasses the registry.
    """

    def __init__(self) -> None:
        self.clock = 0.0
        self.dispatched = 0
        self._queue: list[tuple[float, int, SimEvent]] = []
        self._next_seq = 0
        self._handlers: dict[EventKind, Callable[[SimEvent], None]] = {}

    def on(self, kind: EventKind, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, event: SimEvent) -> SimEvent:
        if event.fire_time < self.clock:
            raise SchedulingError(
                f"event {event!r} scheduled in the past (clock={self.clock:g})"
            )
        event.sequence = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._queue, (event.fire_time, event.sequence, event))
        return event

    def at(self, fire_time, kind, target=None, payload=None, action=None) -> SimEvent:
        return self.schedule(SimEvent(fire_time, kind, target, payload, action))

    def after(self, delay, kind, target=None, payload=None, action=None) -> SimEvent:
        return self.schedule(SimEvent(self.clock + delay, kind, target, payload, action))

    @property
    def pending(self) -> int:
        return len(self._queue)

    def run(self, until: float) -> float:
        queue = self._queue
        handlers = self._handlers
        while queue and queue[0][0] <= until:
            fire_time, _, event = heapq.heappop(queue)
            self.clock = fire_time
            self.dispatched += 1
            if event.action is not None:
                event.action(event)
            else:
                handlers[event.kind](event)
        if until > self.clock:
            self.clock = until
        return self.clock


class RngStream:
    """A named, independently seeded random stream.

    Streams are derived from ``(seed, stream_id)`` by hashing, so consuming
    one stream never shifts another.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = int(seed)
        self.stream_id = stream_id
        self._rng = random.Random(f"{self.seed}/{stream_id}")
        self.random = self._rng.random

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        if not high >= low:
            raise ConfigError(f"uniform range is empty: [{low}, {high})")
        return low + (high - low) * self._rng.random()

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high)``."""
        if high <= low:
            raise ConfigError(f"integer range is empty: [{low}, {high})")
        return self._rng.randrange(low, high)

    def bernoulli(self, p: float) -> bool:
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"bernoulli probability out of range: {p}")
        return self._rng.random() < p

    def categorical(self, weights: Sequence[float]) -> int:
        """Index drawn with probability proportional to ``weights``."""
        total = 0.0
        for w in weights:
            if w < 0:
                raise ConfigError(f"negative categorical weight: {w}")
            total += w
        if not total > 0:
            raise ConfigError("categorical weights sum to zero")
        u = self._rng.random() * total
        acc = 0.0
        last = len(weights) - 1
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return last

    def numpy(self):
        """A numpy Generator seeded from this stream (for vectorised consumers)."""
        import numpy as np

        return np.random.default_rng(self._rng.getrandbits(64))


class RngService:
    """Hands out one :class:`RngStream` per consumer label."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, RngStream] = {}

    def stream(self, stream_id: str) -> RngStream:
        s = self._streams.get(stream_id)
        if s is None:
            s = self._streams[stream_id] = RngStream(self.seed, stream_id)
        return s


def draw(stream: RngStream, distribution: tuple):
    """Generic draw: ``("uniform",)``, ``("int", lo, hi)`` or ``("bernoulli", p)``."""
    kind, *args = distribution
    if kind == "uniform":
        return stream.uniform(*args)
    if kind == "int":
        return stream.integer(*args)
    if kind == "bernoulli":
        return stream.bernoulli(*args)
    raise ConfigError(f"unknown distribution {kind!r}")
