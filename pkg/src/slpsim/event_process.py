"""Real-event generators: pure Poisson, outlier-perturbed and bursty timelines.

All times are in units of the round duration ``mu``'s clock (the caller
picks ``mu``); every event gets an independently uniform grid cell.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = ["EventModel", "RealEvent", "EventTrain", "generate",
           "generate_pure", "generate_perturbed", "generate_burst"]

KINDS = ("pure", "perturbed", "burst")


@dataclass(frozen=True)
class EventModel:
    """Real-event process description.

    ``burst_offset`` is the position of the first burst event inside
    ``burst_round``, as a fraction of a round.  Leave it ``None`` to draw it
    from the generator; experiments fix it once so that every run puts the
    burst at the same place.
    """

    kind: str = "pure"
    mu: float = 1.0
    perturb_fraction: float = 0.0
    perturb_mean: float = 0.001
    burst_size: int = 10
    pause: float = 0.001
    burst_round: int = 40
    burst_offset: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.kind == "perturbed":
            if not 0 <= self.perturb_fraction < 1:
                raise ValueError("perturb_fraction must lie in [0, 1)")
            if not 0 < self.perturb_mean < self.mu:
                raise ValueError("perturb_mean must lie in (0, mu)")
        if self.kind == "burst":
            if self.burst_size < 1:
                raise ValueError("burst_size must be positive")
            if not 0 < self.pause < self.mu:
                raise ValueError("pause must lie in (0, mu)")
            if self.burst_round < 0:
                raise ValueError("burst_round must be non-negative")
            if self.burst_offset is not None and not 0 <= self.burst_offset < 1:
                raise ValueError("burst_offset must lie in [0, 1)")


class RealEvent(NamedTuple):
    time: float
    cell: tuple[int, int]


@dataclass
class EventTrain:
    """Time-sorted real events with their cells on a ``side`` x ``side`` grid."""

    times: np.ndarray
    cells: np.ndarray
    side: int
    burst: np.ndarray = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 2)
        if self.burst is None:
            self.burst = np.zeros(self.times.size, dtype=bool)

    def __len__(self):
        return self.times.size

    def __iter__(self):
        for t, (x, y) in zip(self.times, self.cells):
            yield RealEvent(float(t), (int(x), int(y)))

    @property
    def nodes(self) -> np.ndarray:
        """Row-major node ids of the event cells."""
        return self.cells[:, 1] * self.side + self.cells[:, 0]

    @classmethod
    def empty(cls, side: int) -> "EventTrain":
        return cls(np.empty(0), np.empty((0, 2), dtype=np.int64), side)

    def to_text(self) -> str:
        rows = ["time,cell_x,cell_y"]
        rows += [f"{t!r},{x},{y}" for t, (x, y) in zip(self.times.tolist(),
                                                     self.cells.tolist())]
        return "\n".join(rows) + "\n"


def _arrivals(mu: float, horizon: float, rng: np.random.Generator,
              perturb: tuple[float, float] | None = None) -> np.ndarray:
    """Renewal arrival times in ``[0, horizon)`` with Exp(mu) (or mixed) gaps."""
    if horizon <= 0:
        return np.empty(0)
    chunk = int(horizon / mu + 10 * np.sqrt(horizon / mu) + 16)
    gaps = []
    total = 0.0
    while total < horizon:
        g = rng.standard_exponential(chunk)
        if perturb is None:
            g *= mu
        else:
            fraction, small_mean = perturb
            hit = rng.random(chunk) < fraction
            g *= np.where(hit, small_mean, mu)
        gaps.append(g)
        total += g.sum()
    times = np.cumsum(np.concatenate(gaps))
    return times[times < horizon]


def _cells(count: int, side: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, side, size=(count, 2))


def generate_pure(model: EventModel, horizon: float, rng: np.random.Generator,
                  side: int) -> EventTrain:
    """Poisson events of rate ``1/mu`` up to ``horizon``."""
    if model.kind != "pure":
        raise ValueError(f"expected a pure model, got {model.kind!r}")
    times = _arrivals(model.mu, horizon, rng)
    return EventTrain(times, _cells(times.size, side, rng), side)


def generate_perturbed(model: EventModel, horizon: float, rng: np.random.Generator,
                       side: int) -> EventTrain:
    """Renewal events whose gaps are ``Exp(perturb_mean)`` with probability
    ``perturb_fraction`` and ``Exp(mu)`` otherwise."""
    if model.kind != "perturbed":
        raise ValueError(f"expected a perturbed model, got {model.kind!r}")
    times = _arrivals(model.mu, horizon, rng,
                      (model.perturb_fraction, model.perturb_mean))
    return EventTrain(times, _cells(times.size, side, rng), side)


def generate_burst(model: EventModel, horizon: float, rng: np.random.Generator,
                   side: int) -> EventTrain:
    """Poisson background plus one burst of ``burst_size`` events spaced by
    exactly ``pause``, starting inside round ``burst_round``."""
    if model.kind != "burst":
        raise ValueError(f"expected a burst model, got {model.kind!r}")
    offset = model.burst_offset
    background = _arrivals(model.mu, horizon, rng)
    if offset is None:
        offset = float(rng.random())
    start = (model.burst_round + offset) * model.mu
    last = start + (model.burst_size - 1) * model.pause
    if not last < horizon:
        raise ValueError(f"burst ends at {last}, beyond horizon {horizon}")
    burst = start + model.pause * np.arange(model.burst_size)
    times = np.concatenate([background, burst])
    is_burst = np.concatenate([np.zeros(background.size, bool),
                               np.ones(burst.size, bool)])
    order = np.argsort(times, kind="stable")
    cells = _cells(times.size, side, rng)
    return EventTrain(times[order], cells, side, is_burst[order])


_GENERATORS = {"pure": generate_pure, "perturbed": generate_perturbed,
               "burst": generate_burst}


def generate(model: EventModel, horizon: float, rng: np.random.Generator,
             side: int) -> EventTrain:
    return _GENERATORS[model.kind](model, horizon, rng, side)
