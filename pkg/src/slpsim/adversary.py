"""The global eavesdropper: windowed A-D tests over origin inter-transmission
times, false-alarm series, trend alarms and outage bookkeeping.

Window policies
---------------
``fixed``
    The last ``window`` intervals ending at the tested record.  On the
    ``event`` axis only real-event records (or probe points) are tested; on
    the ``round`` axis every record is.
``cumulative``
    At the end of round ``i``, every interval recorded in rounds ``0..i``.
``per_round``
    At the end of round ``i``, the intervals ending inside round ``i``.

Rounds are numbered from 0; round ``i`` covers ``[i*mu, (i+1)*mu)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .scheduler import Timeline
from .stats_core import CriticalValueTable, ad_statistic_sorted

__all__ = ["EveConfig", "FaSeries", "Detection", "OutageStats", "observe",
           "fa_average", "trend_detect", "outage_stats", "window_bounds"]

POLICIES = ("fixed", "cumulative", "per_round")
AXES = ("round", "event")
TEST_REJECT, TREND_ALARM = "test_reject", "trend_alarm"
FALSE_ALARM, TRUE_POSITIVE = "false_alarm", "true_positive"


@dataclass(frozen=True)
class EveConfig:
    """Eavesdropper parameters.

    ``warmup`` decides what a ``fixed`` window does before ``window``
    intervals exist: ``skip`` the test, or ``accumulate`` and test whatever
    has been recorded (at least the smallest tabulated size).
    """

    alpha: float = 0.01
    window: int = 200
    window_policy: str = "fixed"
    axis: str = "event"
    trend_span: int = 5
    trend_sigma: float = 3.0
    warmup: str = "skip"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if self.window_policy not in POLICIES:
            raise ValueError(f"unknown window policy {self.window_policy!r}")
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}")
        if self.window_policy != "fixed" and self.axis != "round":
            raise ValueError(f"{self.window_policy!r} windows are indexed by round")
        if self.trend_span < 2:
            raise ValueError("trend_span must be at least 2")
        if not self.trend_sigma > 0:
            raise ValueError("trend_sigma must be positive")
        if self.warmup not in ("skip", "accumulate"):
            raise ValueError(f"unknown warmup mode {self.warmup!r}")


@dataclass
class FaSeries:
    """Reject rates on a round or event axis.

    ``values[i]`` is NaN where no test ran.  ``counts[i]`` is the number of
    runs that contributed to index ``i`` and ``tests[i]`` the number of A-D
    tests behind it.
    """

    axis: str
    values: np.ndarray
    counts: np.ndarray
    tests: np.ndarray
    run_count: int = 1
    seeds: list = field(default_factory=list)

    def __len__(self):
        return self.values.size

    def padded(self, length: int) -> "FaSeries":
        extra = length - len(self)
        if extra < 0:
            raise ValueError("cannot pad to a shorter length")
        return FaSeries(self.axis,
                        np.concatenate([self.values, np.full(extra, np.nan)]),
                        np.concatenate([self.counts, np.zeros(extra, np.int64)]),
                        np.concatenate([self.tests, np.zeros(extra, np.int64)]),
                        self.run_count, list(self.seeds))

    def mean_rate(self) -> float:
        """Run-weighted mean reject rate over all indices with data."""
        ok = self.counts > 0
        if not ok.any():
            return float("nan")
        return float(np.sum(self.values[ok] * self.counts[ok]) / self.counts[ok].sum())

    def to_text(self) -> str:
        rows = ["index,fa_rate,run_count"]
        rows += [f"{i},{v!r},{c}" for i, (v, c) in
                 enumerate(zip(self.values.tolist(), self.counts.tolist()))]
        return "\n".join(rows) + "\n"


class Detection(NamedTuple):
    time: float
    kind: str
    truth: str


@dataclass(frozen=True)
class OutageStats:
    outage_count: int
    tests_run: int

    @property
    def outage_rate(self) -> float:
        return self.outage_count / self.tests_run if self.tests_run else 0.0


def _test_points(timeline: Timeline, config: EveConfig,
                 probe_times) -> np.ndarray:
    """Record indices (into the timeline) at which Eve runs a test."""
    times = timeline.times
    if config.axis == "event":
        if probe_times is None:
            return np.flatnonzero(timeline.is_real)
        # -1 marks a probe that precedes every record; it is never testable
        return np.searchsorted(times, np.asarray(probe_times, dtype=float), side="right") - 1
    if config.window_policy == "fixed":
        return np.arange(times.size)
    rounds = timeline.rounds
    n_rounds = int(np.ceil(timeline.horizon / timeline.mu - 1e-12))
    # last record of each round that has one
    last = np.searchsorted(rounds, np.arange(n_rounds), side="right") - 1
    first = np.searchsorted(rounds, np.arange(n_rounds), side="left")
    return last[last >= first]


def _critical(table: CriticalValueTable, alpha: float, cache: dict, size: int) -> float:
    if size not in cache:
        cache[size] = table.critical_value(size, alpha)
    return cache[size]


def window_bounds(timeline: Timeline, config: EveConfig, table: CriticalValueTable,
                 probe_times=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate test points and their windows.

    Returns ``(points, starts, ok)``: the record index of every candidate
    test, the first record of its window (the test covers the intervals
    between records ``starts[k]`` and ``points[k]``) and whether the test
    can run at all.
    """
    points = _test_points(timeline, config, probe_times)
    t = config.window
    if config.window_policy == "fixed":
        starts = points - t
        if config.warmup == "accumulate":
            starts = np.maximum(starts, 0)
    elif config.window_policy == "cumulative":
        starts = np.zeros(points.size, dtype=np.int64)
    else:
        rounds = timeline.rounds
        first_of_round = np.searchsorted(rounds, rounds[np.maximum(points, 0)], side="left")
        starts = np.maximum(first_of_round - 1, 0)
    sizes = points - starts
    ok = (points >= 0) & (starts >= 0) & (sizes >= max(2, table.min_size))
    if config.window_policy == "fixed" and config.warmup == "skip":
        ok &= sizes == t
    return points, starts, ok


def observe(timeline: Timeline, config: EveConfig, table: CriticalValueTable,
            probe_times=None, seed=None) -> tuple[list[Detection], FaSeries]:
    """Run Eve over one timeline.

    Parameters
    ----------
    timeline : Timeline
        Merged origin timeline.
    config : EveConfig
    table : CriticalValueTable
    probe_times : array_like, optional
        Event axis only.  Test at the last record at or before each probe time
        instead of at real records; used to calibrate on event-free traffic
        at matched positions.
    seed : optional
        Stored in the returned series for provenance.

    Returns
    -------
    detections : list of Detection
        One per rejected test; a reject is a true positive when a real
        record lies inside the tested window.
    series : FaSeries
        Per-index reject rates for this single run.

    Raises
    ------
    ValueError
        If the timeline is empty or no test point has enough data.
    """
    if len(timeline) == 0:
        raise ValueError("empty timeline")
    x = np.diff(timeline.times)
    real = timeline.is_real.astype(np.int64)
    real_cum = np.concatenate([[0], np.cumsum(real)])
    t = config.window
    policy = config.window_policy
    rounds = timeline.rounds
    candidates, starts, ok = window_bounds(timeline, config, table, probe_times)
    if not ok.any():
        raise ValueError(f"no test point has enough data for a {policy!r} window")
    points, starts = candidates[ok], starts[ok]
    sizes = points - starts

    cache: dict = {}
    reject = np.zeros(points.size, dtype=bool)
    if policy == "fixed" and points.size:
        full = sizes == t
        if full.any():
            windows = sliding_window_view(x, t)[starts[full]]
            stats = ad_statistic_sorted(np.sort(windows, axis=1))
            reject[full] = stats > _critical(table, config.alpha, cache, t)
        for k in np.flatnonzero(~full):
            sample = np.sort(x[starts[k]:points[k]])
            stat = ad_statistic_sorted(sample[None, :])[0]
            reject[k] = stat > _critical(table, config.alpha, cache, int(sizes[k]))
    else:
        for k in range(points.size):
            sample = np.sort(x[starts[k]:points[k]])
            stat = ad_statistic_sorted(sample[None, :])[0]
            reject[k] = stat > _critical(table, config.alpha, cache, int(sizes[k]))

    has_real = (real_cum[points + 1] - real_cum[starts]) > 0
    detections = [Detection(float(timeline.times[p]), TEST_REJECT,
                            TRUE_POSITIVE if hr else FALSE_ALARM)
                  for p, hr in zip(points[reject].tolist(), has_real[reject].tolist())]

    if config.axis == "event":
        # index = event number, i.e. position among all candidate points
        index = np.flatnonzero(ok)
        length = ok.size
    else:
        index = rounds[points]
        length = int(np.ceil(timeline.horizon / timeline.mu - 1e-12))
    tests = np.bincount(index, minlength=length)[:length].astype(np.int64)
    rej = np.bincount(index, weights=reject, minlength=length)[:length]
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(tests > 0, rej / np.maximum(tests, 1), np.nan)
    series = FaSeries(config.axis, values, (tests > 0).astype(np.int64), tests, 1,
                      [] if seed is None else [seed])
    return detections, series


def fa_average(series: list[FaSeries]) -> FaSeries:
    """Pointwise mean of reject rates, weighting each series by its run count
    at every index where it has data."""
    if not series:
        raise ValueError("nothing to average")
    axis, length = series[0].axis, len(series[0])
    for s in series:
        if s.axis != axis or len(s) != length:
            raise ValueError("series must share axis and length")
    counts = np.sum([s.counts for s in series], axis=0)
    tests = np.sum([s.tests for s in series], axis=0)
    weighted = np.sum([np.where(s.counts > 0, s.values * s.counts, 0.0) for s in series],
                      axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, weighted / np.maximum(counts, 1), np.nan)
    seeds = [sd for s in series for sd in s.seeds]
    return FaSeries(axis, values, counts.astype(np.int64), tests.astype(np.int64),
                    sum(s.run_count for s in series), seeds)


def trend_detect(series: FaSeries, config: EveConfig, baseline: FaSeries,
                 truth: str | None = None) -> list[Detection]:
    """Alarm wherever the trailing ``trend_span`` mean of ``series`` exceeds
    the baseline mean by more than ``trend_sigma`` baseline deviations.

    The baseline deviation is the spread of the baseline's pointwise values.
    ``truth`` defaults to true-positive on the event axis (every point there
    is a real-event test) and false-alarm on the round axis.
    """
    base = baseline.values[np.isfinite(baseline.values)]
    if base.size < 2:
        raise ValueError("baseline too short to estimate mean and deviation")
    threshold = base.mean() + config.trend_sigma * base.std(ddof=1)
    if truth is None:
        truth = TRUE_POSITIVE if series.axis == "event" else FALSE_ALARM
    span = config.trend_span
    vals = series.values
    if vals.size < span:
        return []
    win = sliding_window_view(vals, span)
    finite = np.isfinite(win)
    n_ok = finite.sum(axis=1)
    sums = np.where(finite, win, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        trailing = np.where(n_ok > 0, sums / np.maximum(n_ok, 1), np.nan)
    hits = np.flatnonzero(trailing > threshold) + span - 1
    return [Detection(float(j), TREND_ALARM, truth) for j in hits.tolist()]


def outage_stats(detections, tests_run: int) -> OutageStats:
    """Detections on which Eve would act although no real event is present."""
    count = sum(1 for d in detections if d.truth == FALSE_ALARM)
    return OutageStats(count, int(tests_run))
