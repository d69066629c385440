"""Pheromone table, reward, evaporation and route-probability rules."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ConfigError
from .sim import RngStream

log = logging.getLogger(__name__)


def compute_reward(n_nodes: float, e_init: float, e_min: float, e_av: float, hops: float,
                   gamma_max: float | None = None) -> float:
    """Path reward ``N / (E - (E_min - N_j) / (E_av - N_j))``.

    Singular inputs (``E_av == N_j`` or a non-positive denominator) return
    ``gamma_max``, which defaults to ``10 * N / E``.
    """
    if gamma_max is None:
        gamma_max = 10.0 * n_nodes / e_init
    spread = e_av - hops
    if spread == 0:
        log.warning("reward singular: E_av == N_j == %r; clamped to %g", hops, gamma_max)
        return gamma_max
    denom = e_init - (e_min - hops) / spread
    if not denom > 0:
        log.warning("reward denominator %r <= 0; clamped to %g", denom, gamma_max)
        return gamma_max
    return n_nodes / denom


@dataclass(frozen=True)
class PheromoneLimits:
    initial: float = 1.0
    floor: float = 0.05
    ceiling: float = 10.0

    def __post_init__(self):
        if not (0 <= self.floor <= self.initial <= self.ceiling):
            raise ConfigError(
                f"pheromone limits need 0 <= floor <= initial <= ceiling, got {self}"
            )


class PheromoneTable:
    """Matrix of pheromone amounts ``T[neighbor, destination]``.

    Every (row, column) pair exists; new rows and columns are filled with
    the initial value.
    """

    def __init__(self, limits: PheromoneLimits | None = None):
        self.limits = limits or PheromoneLimits()
        self._rows: dict[int, dict[int, float]] = {}
        self._cols: set[int] = set()

    # inspection
    def __contains__(self, key) -> bool:
        n, d = key
        return n in self._rows and d in self._cols

    def __getitem__(self, key) -> float:
        n, d = key
        return self._rows[n][d]

    def __bool__(self) -> bool:
        return bool(self._rows) or bool(self._cols)

    @property
    def neighbors(self) -> list[int]:
        return sorted(self._rows)

    @property
    def destinations(self) -> list[int]:
        return sorted(self._cols)

    def column(self, d: int) -> dict[int, float]:
        if d not in self._cols:
            return {}
        return {n: row[d] for n, row in sorted(self._rows.items())}

    def row(self, n: int) -> dict[int, float]:
        return dict(sorted(self._rows.get(n, {}).items()))

    def entries(self):
        for n in sorted(self._rows):
            row = self._rows[n]
            for d in sorted(row):
                yield n, d, row[d]

    # growth
    def add_neighbor(self, n: int) -> None:
        if n not in self._rows:
            init = self.limits.initial
            self._rows[n] = {d: init for d in self._cols}

    def add_destination(self, d: int) -> None:
        if d not in self._cols:
            self._cols.add(d)
            init = self.limits.initial
            for row in self._rows.values():
                row[d] = init

    def set(self, n: int, d: int, value: float) -> None:
        self.add_neighbor(n)
        self.add_destination(d)
        lim = self.limits
        self._rows[n][d] = min(max(value, lim.floor), lim.ceiling)

    def remove_neighbor(self, n: int) -> None:
        self._rows.pop(n, None)

    def remove_destination(self, d: int) -> None:
        if d in self._cols:
            self._cols.discard(d)
            for row in self._rows.values():
                row.pop(d, None)

    # update rules
    def deposit(self, r: int, s: int, gamma: float, neighbors: Iterable[int] | None = None) -> float:
        """Add ``gamma`` to ``T[r, s]`` (capped at the ceiling); returns the new value."""
        if neighbors is not None and r not in neighbors:
            raise ValueError(f"deposit via {r}, which is not a current neighbor")
        self.add_neighbor(r)
        self.add_destination(s)
        row = self._rows[r]
        row[s] = min(row[s] + gamma, self.limits.ceiling)
        return row[s]

    def evaporate(self, mode: str = "exponential", rate: float = 0.1) -> None:
        """One decay period: ``T*exp(-rate)`` or ``(1-rate)*T``, never below the floor."""
        factor = decay_factor(mode, rate)
        floor = self.limits.floor
        for row in self._rows.values():
            for d, v in row.items():
                v *= factor
                row[d] = v if v > floor else floor

    def prune(self, lost_neighbors: Iterable[int] = ()) -> list[int]:
        """Drop lost neighbours' rows and every fully decayed node.

        A node whose column is all at the floor is removed, unless it is also
        a neighbour whose row still carries pheromone above the floor.
        Returns the ids whose row and/or column disappeared.
        """
        removed = []
        for n in sorted(set(lost_neighbors)):
            if n in self._rows:
                del self._rows[n]
                removed.append(n)
        floor = self.limits.floor
        for x in sorted(set(self._rows) | self._cols):
            if x in self._cols and any(row[x] != floor for row in self._rows.values()):
                continue
            if x in self._rows and any(v != floor for v in self._rows[x].values()):
                continue
            self.remove_destination(x)
            if x in self._rows:
                del self._rows[x]
            removed.append(x)
        return removed

    def check_bounds(self) -> bool:
        lim = self.limits
        return all(lim.floor <= v <= lim.ceiling for _, _, v in self.entries())


def decay_factor(mode: str, rate: float) -> float:
    if mode == "exponential":
        if rate < 0:
            raise ConfigError(f"evaporation rate must be >= 0, got {rate}")
        return math.exp(-rate)
    if mode == "linear":
        if not 0.0 <= rate <= 1.0:
            raise ConfigError(f"linear decay fraction must lie in [0, 1], got {rate}")
        return 1.0 - rate
    raise ConfigError(f"unknown decay mode {mode!r}")


def evaporate(table: PheromoneTable, mode: str = "exponential", rate: float = 0.1) -> PheromoneTable:
    table.evaporate(mode, rate)
    return table


def deposit_pheromone(table: PheromoneTable, r: int, s: int, gamma: float,
                      neighbors: Iterable[int] | None = None) -> PheromoneTable:
    table.deposit(r, s, gamma, neighbors)
    return table


def prune_decayed(table: PheromoneTable, lost_neighbors: Iterable[int] = ()) -> PheromoneTable:
    table.prune(lost_neighbors)
    return table


class NoRouteError(LookupError):
    pass


def probabilities(values: Mapping[int, float], alpha: float = 0.0, beta: float = 2.0) -> dict[int, float]:
    """Normalised ``(T + alpha) ** beta`` weights over the given links."""
    if not values:
        raise NoRouteError("no neighbor to choose from")
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    if not 0 <= beta <= 2:
        raise ConfigError(f"beta must lie in [0, 2], got {beta}")
    weights = {n: (t + alpha) ** beta for n, t in values.items()}
    total = math.fsum(weights.values())
    if total <= 0:
        # every weight is zero (T = 0 and alpha = 0): no preference
        return {n: 1.0 / len(weights) for n in weights}
    return {n: w / total for n, w in weights.items()}


def route_probabilities(table: PheromoneTable, d: int, alpha: float = 0.0, beta: float = 2.0) -> dict[int, float]:
    """Selection probability of each neighbour row toward destination ``d``."""
    return probabilities(table.column(d), alpha, beta)


def sample_path(probs: Mapping[int, float], rng: RngStream):
    keys = list(probs)
    if len(keys) == 1:
        rng.random()
        return keys[0]
    return keys[rng.categorical([probs[k] for k in keys])]
