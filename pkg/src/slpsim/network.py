"""Grid topology, shortest-path route emulation, energy and latency accounting.

Cells are ``(x, y)`` pairs on a ``side`` x ``side`` grid and map to node ids
in row-major order (``y * side + x``).  Every origin, fake or real, forwards
along the same deterministic x-then-y staircase, one transmission per hop.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scheduler import REAL, Timeline

__all__ = ["Grid", "Route", "LatencyRecord", "EnergyLedger", "route",
           "report_latency", "latency_records", "account_energy",
           "assign_spatial_cluster", "cluster_dummy_population"]


@dataclass(frozen=True)
class Grid:
    side: int
    sink: tuple[int, int] | None = None

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("grid side must be positive")
        if self.sink is None:
            c = (self.side - 1) // 2
            object.__setattr__(self, "sink", (c, c))
        else:
            object.__setattr__(self, "sink", (int(self.sink[0]), int(self.sink[1])))
        if not self.contains(self.sink):
            raise ValueError(f"sink {self.sink} outside the grid")

    @property
    def n(self) -> int:
        return self.side * self.side

    def contains(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.side and 0 <= y < self.side

    def cell_of(self, node: int) -> tuple[int, int]:
        return (int(node) % self.side, int(node) // self.side)

    def node_of(self, cell) -> int:
        return int(cell[1]) * self.side + int(cell[0])

    def hop_counts(self) -> np.ndarray:
        """Route length of every node id, indexed by node."""
        ids = np.arange(self.n)
        xs, ys = ids % self.side, ids // self.side
        return np.abs(xs - self.sink[0]) + np.abs(ys - self.sink[1])

    @property
    def worst_case_hops(self) -> int:
        return int(self.hop_counts().max())


@dataclass(frozen=True)
class Route:
    origin: tuple[int, int]
    hops: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return len(self.hops)


def route(grid: Grid, origin) -> Route:
    """Staircase shortest path: move along x first, then along y."""
    origin = (int(origin[0]), int(origin[1]))
    if not grid.contains(origin):
        raise ValueError(f"origin {origin} outside the grid")
    x, y = origin
    sx, sy = grid.sink
    hops = []
    step = 1 if sx > x else -1
    while x != sx:
        x += step
        hops.append((x, y))
    step = 1 if sy > y else -1
    while y != sy:
        y += step
        hops.append((x, y))
    return Route(origin, tuple(hops))


@dataclass(frozen=True)
class LatencyRecord:
    event_time: float
    report_time: float
    hops: int
    hop_delay: float
    violation: bool = False

    @property
    def latency(self) -> float:
        return self.report_time - self.event_time


def report_latency(route_: Route, event_time: float, hop_delay: float,
                   delta_bound: float = np.inf) -> LatencyRecord:
    """Report time of an undelayed real event; flags ``h * delay > delta``."""
    if not hop_delay > 0:
        raise ValueError("hop_delay must be positive")
    h = route_.length
    return LatencyRecord(float(event_time), float(event_time + h * hop_delay),
                         h, float(hop_delay), bool(h * hop_delay > delta_bound))


def latency_records(timeline: Timeline, grid: Grid, hop_delay: float,
                    delta_bound: float = np.inf) -> list[LatencyRecord]:
    """Latency of every real origin in the timeline."""
    real = timeline.is_real
    return [report_latency(route(grid, grid.cell_of(node)), t, hop_delay, delta_bound)
            for t, node in zip(timeline.times[real].tolist(),
                               timeline.nodes[real].tolist())]


@dataclass
class EnergyLedger:
    """Hop-transmission counters.

    ``node_hops`` charges each origin with the length of its route;
    ``node_wakeups`` counts how many times each node acted as an origin.
    """

    n: int
    per_round: dict = field(default_factory=dict)
    per_event: list = field(default_factory=list)
    node_hops: np.ndarray = None
    node_wakeups: np.ndarray = None

    def __post_init__(self):
        if self.node_hops is None:
            self.node_hops = np.zeros(self.n, dtype=np.int64)
        if self.node_wakeups is None:
            self.node_wakeups = np.zeros(self.n, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(sum(self.per_round.values()))

    def rounds_text(self) -> str:
        rows = ["round,hop_transmissions"]
        rows += [f"{k},{v}" for k, v in sorted(self.per_round.items())]
        return "\n".join(rows) + "\n"

    def nodes_text(self) -> str:
        rows = ["node,cumulative_hops"]
        rows += [f"{i},{v}" for i, v in enumerate(self.node_hops.tolist())]
        return "\n".join(rows) + "\n"


def account_energy(ledger: EnergyLedger, timeline: Timeline, grid: Grid) -> EnergyLedger:
    """Charge every origin's route to its round and node, and record the
    per-event cost W = (fake routes in the event's round) + (real route)."""
    if len(timeline) == 0:
        return ledger
    if ledger.n != grid.n:
        raise ValueError("ledger and grid disagree on node count")
    if timeline.nodes.min() < 0 or timeline.nodes.max() >= grid.n:
        raise ValueError("timeline origin outside the grid")
    h = grid.hop_counts()[timeline.nodes]
    uniq, inv = np.unique(timeline.rounds, return_inverse=True)
    sums = np.bincount(inv, weights=h).astype(np.int64)
    for r, s in zip(uniq.tolist(), sums.tolist()):
        ledger.per_round[r] = ledger.per_round.get(r, 0) + s
    np.add.at(ledger.node_hops, timeline.nodes, h)
    np.add.at(ledger.node_wakeups, timeline.nodes, 1)

    fake = timeline.kinds != REAL
    fake_sums = np.bincount(inv, weights=np.where(fake, h, 0)).astype(np.int64)
    for idx in np.flatnonzero(~fake):
        ledger.per_event.append(int(fake_sums[inv[idx]] + h[idx]))
    return ledger


def _row_major_order(cells) -> list[tuple[int, int]]:
    return sorted(((int(x), int(y)) for x, y in cells), key=lambda c: (c[1], c[0]))


def assign_spatial_cluster(grid: Grid, principal, b: int, unscheduled) -> set:
    """The ``b`` unscheduled cells closest (Euclidean) to ``principal``.

    Ties are broken by row-major cell order.
    """
    if b < 0:
        raise ValueError("b must be non-negative")
    pool = [c for c in _row_major_order(unscheduled) if tuple(c) != tuple(principal)]
    if len(pool) < b:
        raise ValueError(f"only {len(pool)} unscheduled cells, need {b}")
    px, py = principal
    pool.sort(key=lambda c: (c[0] - px) ** 2 + (c[1] - py) ** 2)
    return set(pool[:b])


def cluster_dummy_population(grid: Grid, principal, b: int, d: int, unscheduled,
                             rng: np.random.Generator) -> tuple[set, set]:
    """Dummy population for one round when bursts are spatially correlated.

    Returns ``(cluster, scattered)``: the principal cell plus its ``b``
    nearest unscheduled neighbours, and ``d - 1 - b`` further cells drawn
    uniformly from the remaining unscheduled ones.
    """
    if not b < d:
        raise ValueError("need b < d")
    cluster = assign_spatial_cluster(grid, principal, b, unscheduled)
    cluster.add((int(principal[0]), int(principal[1])))
    rest = [c for c in _row_major_order(unscheduled) if c not in cluster]
    k = d - 1 - b
    if len(rest) < k:
        raise ValueError(f"only {len(rest)} cells left for {k} scattered dummies")
    pick = rng.choice(len(rest), size=k, replace=False)
    return cluster, {rest[i] for i in sorted(pick.tolist())}
