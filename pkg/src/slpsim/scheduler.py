"""Decentralized fake-traffic schedules and the global transmission timeline.

Three generators produce fake origin transmissions:

* ``schedule_baseline``: every node draws one uniform instant per epoch of
  length ``T = mu * n / d``.
* ``schedule_group``: nodes are split into ``d`` groups of ``n // d``; in
  round ``k`` the member with index ``k mod (n // d)`` of each group draws a
  uniform instant inside the round.
* ``schedule_reference``: a single virtual source with Exp(mu/d) gaps.

Per-node draws come from one row per scheduling interval of a matrix filled
from the generator, so node ``j``'s ``m``-th draw depends only on the seed
and ``(m, j)``, never on loop order or on how many intervals are requested.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .event_process import EventTrain

__all__ = ["SchedulerConfig", "FakeTransmission", "FakeSchedule", "Timeline",
           "FAKE", "REAL", "partition_groups", "schedule_baseline",
           "schedule_group", "schedule_reference", "schedule", "merge",
           "intervals"]

VARIANTS = ("baseline", "group", "reference")
FAKE, REAL = 0, 1


@dataclass(frozen=True)
class SchedulerConfig:
    n: int
    d: int
    mu: float = 1.0
    variant: str = "group"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown scheduler variant {self.variant!r}")
        if not 1 <= self.d <= self.n:
            raise ValueError(f"need 1 <= d <= n, got d={self.d}, n={self.n}")
        if not self.mu > 0:
            raise ValueError("mu must be positive")

    @property
    def group_size(self) -> int:
        return self.n // self.d

    @property
    def epoch(self) -> float:
        return self.mu * self.n / self.d


class FakeTransmission(NamedTuple):
    time: float
    node: int
    round: int


@dataclass
class FakeSchedule:
    """Time-sorted fake transmissions; ``rounds`` is the index of the
    scheduling interval (epoch or round) that produced each draw."""

    times: np.ndarray
    nodes: np.ndarray
    rounds: np.ndarray

    def __len__(self):
        return self.times.size

    def __iter__(self):
        for t, n, r in zip(self.times.tolist(), self.nodes.tolist(),
                           self.rounds.tolist()):
            yield FakeTransmission(t, n, r)

    def _sorted(self) -> "FakeSchedule":
        order = np.lexsort((self.nodes, self.times))
        return FakeSchedule(self.times[order], self.nodes[order], self.rounds[order])

    def truncate(self, horizon: float) -> "FakeSchedule":
        keep = self.times <= horizon
        return FakeSchedule(self.times[keep], self.nodes[keep], self.rounds[keep])


def _unit_open_closed(rng: np.random.Generator, shape) -> np.ndarray:
    return 1.0 - rng.random(shape)


def schedule_baseline(config: SchedulerConfig, epochs: int,
                      rng: np.random.Generator) -> FakeSchedule:
    if config.variant != "baseline":
        raise ValueError(f"expected the baseline variant, got {config.variant!r}")
    if epochs < 1:
        raise ValueError("need at least one epoch")
    T = config.epoch
    u = _unit_open_closed(rng, (epochs, config.n))
    epoch_idx = np.repeat(np.arange(epochs), config.n)
    times = (epoch_idx + u.ravel()) * T
    nodes = np.tile(np.arange(config.n), epochs)
    return FakeSchedule(times, nodes, epoch_idx)._sorted()


def partition_groups(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random ``(d, n // d)`` array of node ids; row = group, column = member
    index.  The ``n - d * (n // d)`` left-over nodes stay idle."""
    g = n // d
    perm = rng.permutation(n)
    return perm[: d * g].reshape(d, g)


def schedule_group(config: SchedulerConfig, rounds: int, rng: np.random.Generator,
                   groups: np.ndarray | None = None) -> FakeSchedule:
    """Group schedule over ``rounds`` rounds; exactly ``d`` draws per round.

    The partition is drawn from ``rng`` first unless ``groups`` is supplied.
    """
    if config.variant != "group":
        raise ValueError(f"expected the group variant, got {config.variant!r}")
    if rounds < 1:
        raise ValueError("need at least one round")
    if groups is None:
        groups = partition_groups(config.n, config.d, rng)
    d, g = groups.shape
    u = _unit_open_closed(rng, (rounds, d))
    k = np.arange(rounds)
    times = (k[:, None] + u) * config.mu
    nodes = groups[:, k % g].T
    rnd = np.broadcast_to(k[:, None], (rounds, d))
    return FakeSchedule(times.ravel(), nodes.ravel().copy(), rnd.ravel().copy())._sorted()


def schedule_reference(config: SchedulerConfig, horizon: float,
                       rng: np.random.Generator) -> FakeSchedule:
    """Idealised single-source schedule with Exp(mu/d) gaps up to ``horizon``."""
    if config.variant != "reference":
        raise ValueError(f"expected the reference variant, got {config.variant!r}")
    if horizon <= 0:
        empty = np.empty(0, dtype=np.int64)
        return FakeSchedule(np.empty(0), empty, empty)
    mean = config.mu / config.d
    expected = horizon / mean
    chunk = int(expected + 10 * np.sqrt(expected) + 16)
    parts, total = [], 0.0
    while total < horizon:
        g = rng.standard_exponential(chunk) * mean
        parts.append(g)
        total += g.sum()
    times = np.cumsum(np.concatenate(parts))
    times = times[times <= horizon]
    nodes = np.arange(times.size) % config.n
    rounds = np.floor(times / config.mu).astype(np.int64)
    return FakeSchedule(times, nodes, rounds)


def schedule(config: SchedulerConfig, rounds: int, rng: np.random.Generator) -> FakeSchedule:
    """Fake schedule of any variant covering ``rounds`` rounds of length mu."""
    horizon = rounds * config.mu
    if config.variant == "group":
        return schedule_group(config, rounds, rng)
    if config.variant == "baseline":
        epochs = int(np.ceil(horizon / config.epoch - 1e-12))
        return schedule_baseline(config, max(epochs, 1), rng).truncate(horizon)
    return schedule_reference(config, horizon, rng)


@dataclass
class Timeline:
    """Global origin timeline as seen by the eavesdropper.

    ``kinds`` holds ``FAKE`` (0) or ``REAL`` (1); records are sorted by
    ``(time, kind, node)``.
    """

    times: np.ndarray
    nodes: np.ndarray
    kinds: np.ndarray
    horizon: float
    mu: float = 1.0

    def __len__(self):
        return self.times.size

    @property
    def is_real(self) -> np.ndarray:
        return self.kinds == REAL

    @property
    def rounds(self) -> np.ndarray:
        return np.floor(self.times / self.mu).astype(np.int64)

    def to_text(self) -> str:
        rows = ["time,node,kind"]
        rows += [f"{t!r},{n},{'R' if k == REAL else 'F'}"
                 for t, n, k in zip(self.times.tolist(), self.nodes.tolist(),
                                    self.kinds.tolist())]
        return "\n".join(rows) + "\n"


def merge(fake: FakeSchedule, real: EventTrain | None, horizon: float,
          mu: float = 1.0) -> Timeline:
    """Insert real events, undelayed, into the fake schedule."""
    if real is None or len(real) == 0:
        times, nodes = fake.times, fake.nodes
        kinds = np.zeros(times.size, dtype=np.int8)
    else:
        times = np.concatenate([fake.times, real.times])
        nodes = np.concatenate([fake.nodes, real.nodes])
        kinds = np.concatenate([np.full(len(fake), FAKE, np.int8),
                                np.full(len(real), REAL, np.int8)])
    order = np.lexsort((nodes, kinds, times))
    times, nodes, kinds = times[order], nodes[order], kinds[order]
    if times.size and (times[0] < 0 or times[-1] > horizon):
        raise ValueError("timeline records must lie in [0, horizon]")
    return Timeline(times, nodes, kinds, float(horizon), float(mu))


def intervals(timeline: Timeline) -> np.ndarray:
    if len(timeline) < 2:
        raise ValueError("need at least two records to form an interval")
    return np.diff(timeline.times)
