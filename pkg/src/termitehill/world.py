"""Grid world of termites gathering scattered wood chips into piles.

Termites wander on a torus. An unladen termite next to a pile takes one
chip from it; a laden termite next to a pile drops its chip on a free cell
beside that pile, which credits the pile. Piles that run out of wood are
gone for good and no new pile is ever created.

A step moves every termite one cell, then lets each termite act in index
order. Only termites within one cell of a live pile can act, so the action
phase visits those alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError
from .sim import RngStream

_DX = np.array([-1, -1, -1, 0, 0, 1, 1, 1])
_DY = np.array([-1, 0, 1, -1, 1, -1, 0, 1])
_RING = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]


@dataclass
class Pile:
    id: int
    position: tuple[int, int]
    wood_count: int


@dataclass(frozen=True)
class TermiteAgent:
    position: tuple[int, int]
    carrying: bool


class WorldGrid:
    """Torus of ``width x height`` cells holding piles and termites."""

    def __init__(self, width: int, height: int, gen: np.random.Generator):
        if width < 1 or height < 1:
            raise ConfigError("world dimensions must be >= 1")
        self.width = width
        self.height = height
        self.gen = gen
        self.time = 0
        self.num_wood = 0
        self.piles: dict[int, Pile] = {}
        self.pile_at = np.full((width, height), -1, dtype=np.int64)
        # live piles within Chebyshev distance 1 of each cell
        self.near = np.zeros((width, height), dtype=np.int32)
        self.x = np.zeros(0, dtype=np.int64)
        self.y = np.zeros(0, dtype=np.int64)
        self.carrying = np.zeros(0, dtype=bool)
        self._occ: np.ndarray | None = None

    @property
    def num_termites(self) -> int:
        return len(self.x)

    @property
    def termites(self) -> list[TermiteAgent]:
        return [TermiteAgent((int(a), int(b)), bool(c)) for a, b, c in zip(self.x, self.y, self.carrying)]

    def live_pile_ids(self) -> set[int]:
        return set(self.piles)

    def _wrap(self, cx: int, cy: int) -> tuple[int, int]:
        return cx % self.width, cy % self.height

    def _mark(self, pos: tuple[int, int], delta: int) -> None:
        px, py = pos
        for dx, dy in _RING:
            self.near[(px + dx) % self.width, (py + dy) % self.height] += delta

    def add_pile(self, pid: int, pos: tuple[int, int], wood: int = 1) -> Pile:
        pos = self._wrap(*pos)
        if self.pile_at[pos] != -1:
            raise ConfigError(f"cell {pos} already holds a pile")
        pile = Pile(pid, pos, wood)
        self.piles[pid] = pile
        self.pile_at[pos] = pid
        self._mark(pos, +1)
        return pile

    def _remove_pile(self, pile: Pile) -> None:
        del self.piles[pile.id]
        self.pile_at[pile.position] = -1
        self._mark(pile.position, -1)

    def set_termites(self, positions: Iterable[tuple[int, int]], carrying: Iterable[bool] | None = None) -> None:
        pts = np.array(list(positions), dtype=np.int64).reshape(-1, 2)
        self.x = pts[:, 0] % self.width
        self.y = pts[:, 1] % self.height
        self.carrying = (np.zeros(len(pts), dtype=bool) if carrying is None
                         else np.array(list(carrying), dtype=bool))
        self._occ = None

    def occupancy(self) -> np.ndarray:
        if self._occ is None:
            flat = np.bincount(self.x * self.height + self.y, minlength=self.width * self.height)
            self._occ = flat.reshape(self.width, self.height)
        return self._occ

    def _torus_dist(self, a: tuple[int, int], b: tuple[int, int]) -> int:
        dx = abs(a[0] - b[0])
        dy = abs(a[1] - b[1])
        return max(min(dx, self.width - dx), min(dy, self.height - dy))

    def piles_around(self, pos: tuple[int, int]) -> list[Pile]:
        """Live piles within one cell of ``pos``, nearest first, then by id."""
        found = []
        for dx, dy in _RING:
            pid = self.pile_at[(pos[0] + dx) % self.width, (pos[1] + dy) % self.height]
            if pid != -1:
                found.append(self.piles[int(pid)])
        found.sort(key=lambda p: (self._torus_dist(pos, p.position), p.id))
        return found


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.numpy()
    return RngStream(int(rng), "world").numpy()


def init_world(num_wood: int, num_termites: int, width: int = 200, height: int = 200, rng=0) -> WorldGrid:
    """Single-chip piles ``1..num_wood`` and unladen termites on distinct random cells.

    ``rng`` is an :class:`RngStream`, a numpy ``Generator`` or an integer seed.
    """
    if num_wood < 0 or num_termites < 0:
        raise ConfigError("wood and termite counts must be >= 0")
    if num_wood + num_termites > width * height:
        raise ConfigError(f"{num_wood} wood + {num_termites} termites do not fit on a {width}x{height} grid")
    world = WorldGrid(width, height, _generator(rng))
    cells = world.gen.choice(width * height, size=num_wood + num_termites, replace=False)
    for i, c in enumerate(cells[:num_wood]):
        world.add_pile(i + 1, (int(c) // height, int(c) % height))
    world.num_wood = num_wood
    world.set_termites([(int(c) // height, int(c) % height) for c in cells[num_wood:]])
    return world


def pick_up(world: WorldGrid, i: int) -> bool:
    """Termite ``i`` takes a chip from the nearest adjacent pile, if unladen."""
    if world.carrying[i]:
        return False
    pos = (int(world.x[i]), int(world.y[i]))
    if world.near[pos] == 0:
        return False
    pile = world.piles_around(pos)[0]
    pile.wood_count -= 1
    if pile.wood_count < 1:
        world._remove_pile(pile)
    world.carrying[i] = True
    return True


def put_down(world: WorldGrid, i: int) -> bool:
    """Termite ``i`` drops its chip on the free cell beside the nearest pile.

    Free means no pile and no other termite. Cells nearer the termite win,
    then lower cell coordinates. If the nearest pile has no free cell the
    next pile is tried; with none at all the termite keeps its chip.
    """
    if not world.carrying[i]:
        return False
    pos = (int(world.x[i]), int(world.y[i]))
    if world.near[pos] == 0:
        return False
    occ = world.occupancy()
    for pile in world.piles_around(pos):
        px, py = pile.position
        free = []
        for dx, dy in _RING:
            cell = world._wrap(px + dx, py + dy)
            if world.pile_at[cell] != -1:
                continue
            if occ[cell] - (1 if cell == pos else 0) > 0:
                continue
            free.append((world._torus_dist(pos, cell), cell))
        if free:
            pile.wood_count += 1
            world.carrying[i] = False
            return True
    return False


def step_world(world: WorldGrid, rng=None) -> WorldGrid:
    """Advance one time unit: every termite steps, then acts in index order."""
    n = world.num_termites
    if n:
        gen = world.gen if rng is None else _generator(rng)
        d = gen.integers(0, 8, size=n)
        world.x = (world.x + _DX[d]) % world.width
        world.y = (world.y + _DY[d]) % world.height
        world._occ = None
        # piles only ever disappear, so a termite far from every pile now
        # stays far from every pile for the rest of this step
        for i in np.flatnonzero(world.near[world.x, world.y]).tolist():
            if world.carrying[i]:
                put_down(world, i)
            else:
                pick_up(world, i)
    world.time += 1
    return world


def world_metrics(world: WorldGrid) -> tuple[int, int, float]:
    """(live piles, wood in piles, percent of all wood that sits in piles)."""
    woods = sum(p.wood_count for p in world.piles.values())
    pct = 100.0 * woods / world.num_wood if world.num_wood else 0.0
    return len(world.piles), woods, pct


SERIES_HEADER = ["time", "live_piles", "woods_in_piles", "carried"]


def run_world(num_wood: int = 100, num_termites: int = 200, steps: int = 7000, width: int = 200,
              height: int = 200, seed: int = 0, sample_every: int = 1) -> list[tuple[int, int, int, int]]:
    """Time series of ``(time, live_piles, woods_in_piles, carried)``, including time 0."""
    if sample_every < 1:
        raise ConfigError("sample_every must be >= 1")
    world = init_world(num_wood, num_termites, width, height, RngStream(seed, "world"))
    out = []

    def sample():
        live, woods, _ = world_metrics(world)
        out.append((world.time, live, woods, int(world.carrying.sum())))

    sample()
    for _ in range(steps):
        step_world(world)
        if world.time % sample_every == 0:
            sample()
    return out


def write_series(series, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        w.writerows(series)
    return path


def mean_series(all_series) -> list[tuple]:
    """Element-wise mean over seeds of equally sampled series."""
    arr = np.array(all_series, dtype=float)
    mean = arr.mean(axis=0)
    return [(int(r[0]), *(float(v) for v in r[1:])) for r in mean]
