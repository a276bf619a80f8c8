"""Seeded multi-run experiments and their CSV output.

An experiment is fully described by an :class:`ExperimentConfig`, stored as a
flat ``key = value`` file with dotted keys for the nested parts.  Run ``r``
draws its fake schedule and its real events from independent streams seeded
by ``(base_seed, r, role)``, so variants and event models compared under the
same base seed see the same event randomness.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .adversary import (EveConfig, FaSeries, fa_average, observe, outage_stats,
                        OutageStats, window_bounds)
from .event_process import EventModel, EventTrain, generate
from .network import EnergyLedger, Grid, account_energy, latency_records
from .scheduler import SchedulerConfig, merge, schedule
from .stats_core import CriticalValueTable

__all__ = ["ExperimentConfig", "ExperimentResult", "run_experiment",
           "run_figure3", "run_figure4", "run_figure5", "run_all_variants",
           "emit", "run_seeds", "pooled_se", "run_rates", "burst_marks"]

ROLE_SCHEDULER, ROLE_EVENTS, ROLE_BURST = 1, 2, 3


def _default_scheduler():
    return SchedulerConfig(n=32 * 32, d=100, mu=1.0, variant="group", seed=2010)


@dataclass(frozen=True)
class ExperimentConfig:
    scheduler: SchedulerConfig = field(default_factory=_default_scheduler)
    event_model: EventModel | None = None
    eve: EveConfig = field(default_factory=EveConfig)
    grid_side: int = 32
    hop_delay: float | None = None
    delta_bound: float = 0.1
    sigma_rounds: int = 80
    runs: int = 250
    base_seed: int = 2010

    def __post_init__(self):
        if self.scheduler.n != self.grid_side ** 2:
            raise ValueError(f"scheduler.n={self.scheduler.n} does not match a "
                             f"{self.grid_side}x{self.grid_side} grid")
        if self.sigma_rounds < 1:
            raise ValueError("sigma_rounds must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.delta_bound > 0:
            raise ValueError("delta_bound must be positive")
        if self.hop_delay is None:
            side = self.grid_side
            delay = self.delta_bound / (2 * (side - 1)) if side > 1 else self.delta_bound
            object.__setattr__(self, "hop_delay", delay)
        if not self.hop_delay > 0:
            raise ValueError("hop_delay must be positive")
        if self.scheduler.seed != self.base_seed:
            object.__setattr__(self, "scheduler", replace(self.scheduler, seed=self.base_seed))
        if self.event_model is not None and self.event_model.mu != self.scheduler.mu:
            raise ValueError("event_model.mu must equal scheduler.mu")

    @property
    def horizon(self) -> float:
        return self.sigma_rounds * self.scheduler.mu

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_side)

    @property
    def latency_bound_ok(self) -> bool:
        return self.hop_delay * self.grid.worst_case_hops <= self.delta_bound

    def updated(self, **changes) -> "ExperimentConfig":
        """Copy with dotted-key overrides, e.g. ``updated(**{"scheduler.d": 10})``.

        ``event.kind=None`` drops the event model.
        """
        flat = self.to_dict()
        if "event.kind" in changes and changes["event.kind"] is None:
            flat = {k: v for k, v in flat.items() if not k.startswith("event.")}
            changes = {k: v for k, v in changes.items() if not k.startswith("event.")}
        for key, value in changes.items():
            if key not in flat and not key.startswith("event."):
                raise KeyError(key)
            flat[key] = value
        if "grid_side" in changes:
            flat["scheduler.n"] = int(flat["grid_side"]) ** 2
        if ({"grid_side", "delta_bound"} & set(changes)) and "hop_delay" not in changes:
            del flat["hop_delay"]
        if "base_seed" in changes:
            flat["scheduler.seed"] = flat["base_seed"]
        if "scheduler.mu" in changes and "event.kind" in flat:
            flat["event.mu"] = flat["scheduler.mu"]
        return self.from_dict(flat)

    def to_dict(self) -> dict:
        out = {}
        for prefix, obj in (("scheduler", self.scheduler), ("event", self.event_model),
                            ("eve", self.eve)):
            if obj is None:
                continue
            for f in dataclasses.fields(obj):
                out[f"{prefix}.{f.name}"] = getattr(obj, f.name)
        for name in ("grid_side", "hop_delay", "delta_bound", "sigma_rounds", "runs",
                     "base_seed"):
            out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, flat: dict) -> "ExperimentConfig":
        """Build from dotted keys; keys left out take their default values.

        ``scheduler.n`` defaults to ``grid_side**2``, ``scheduler.seed`` to
        ``base_seed`` and ``hop_delay`` to its latency-safe value.
        """
        defaults = {k: v for k, v in cls().to_dict().items()
                    if k not in ("scheduler.n", "scheduler.seed", "hop_delay")}
        flat = {**defaults, **flat}
        flat.setdefault("scheduler.n", int(flat["grid_side"]) ** 2)
        flat.setdefault("scheduler.seed", flat["base_seed"])
        parts = {"scheduler": {}, "event": {}, "eve": {}}
        top = {}
        for key, value in flat.items():
            head, _, tail = key.partition(".")
            if tail:
                if head not in parts:
                    raise KeyError(f"unknown config section {head!r}")
                parts[head][tail] = value
            else:
                top[key] = value
        scheduler = _build(SchedulerConfig, parts["scheduler"])
        event = _build(EventModel, parts["event"]) if parts["event"] else None
        eve = _build(EveConfig, parts["eve"])
        return _build(cls, top, scheduler=scheduler, event_model=event, eve=eve)

    def to_text(self) -> str:
        lines = [f"# slpsim experiment config, version {__version__}"]
        for key, value in self.to_dict().items():
            lines.append(f"{key} = {_fmt(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        flat = {}
        for ln in text.splitlines():
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            key, sep, value = ln.partition("=")
            if not sep:
                raise ValueError(f"malformed config line: {ln!r}")
            flat[key.strip()] = value.strip()
        return cls.from_dict(flat)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(value, annotation: str):
    if not isinstance(value, str):
        return value
    if value.lower() == "none" and "None" in annotation:
        return None
    base = annotation.replace("| None", "").strip()
    if base == "int":
        return int(value)
    if base == "float":
        return float(value)
    if base == "bool":
        return value.lower() in ("1", "true", "yes")
    return value


def _build(cls, values: dict, **fixed):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = dict(fixed)
    for key, value in values.items():
        if key not in known:
            raise KeyError(f"unknown key {key!r} for {cls.__name__}")
        if key in fixed:
            continue
        kwargs[key] = _convert(value, str(known[key].type))
    return cls(**kwargs)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    fa_series: FaSeries
    run_series: list
    outage: OutageStats
    energy: dict
    latency: dict
    calibration: bool = False
    version: str = __version__
    run_marks: list = field(default_factory=list)

    def fa_mean(self) -> float:
        return self.fa_series.mean_rate()


def run_seeds(base_seed: int, run: int, role: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed, run, role]))


def _resolved_event_model(config: ExperimentConfig) -> EventModel | None:
    model = config.event_model
    if model is not None and model.kind == "burst" and model.burst_offset is None:
        rng = np.random.default_rng(np.random.SeedSequence([config.base_seed, ROLE_BURST]))
        model = replace(model, burst_offset=float(rng.random()))
    return model


def burst_marks(timeline, events: EventTrain | None, config: ExperimentConfig,
                table: CriticalValueTable, probe_times=None) -> np.ndarray:
    """Event-axis mask of tests whose window spans at least one burst event.

    A window spans the time from its first record up to the tested event (or
    probe) time, so the mask means the same thing for inserted events and
    for event-free calibration at matched positions.
    """
    points, starts, _ = window_bounds(timeline, config.eve, table, probe_times)
    if events is None or not events.burst.any():
        return np.zeros(points.size, dtype=bool)
    times = timeline.times
    lo = times[np.clip(starts, 0, None)]
    hi = timeline.times[points] if probe_times is None else np.asarray(probe_times, float)
    b = np.sort(events.times[events.burst])
    return np.searchsorted(b, hi, side="right") > np.searchsorted(b, lo, side="left")


def run_experiment(config: ExperimentConfig, table: CriticalValueTable,
                   calibration: bool = False) -> ExperimentResult:
    """Run ``config.runs`` independent runs and average Eve's reject rates.

    With ``calibration=True`` the real events are generated but not inserted;
    on the event axis they serve as probe points, giving the event-free
    false-alarm baseline at matched positions.
    """
    model = _resolved_event_model(config)
    if config.eve.axis == "event" and model is None:
        raise ValueError("event-axis observation needs an event model")
    grid = config.grid
    horizon = config.horizon
    sched = config.scheduler
    series, detections_all, marks = [], [], []
    ledger = EnergyLedger(grid.n)
    latencies = []
    for r in range(config.runs):
        fakes = schedule(sched, config.sigma_rounds, run_seeds(config.base_seed, r,
                                                               ROLE_SCHEDULER))
        events = None
        if model is not None:
            events = generate(model, horizon, run_seeds(config.base_seed, r, ROLE_EVENTS),
                              config.grid_side)
        inserted = None if calibration else events
        timeline = merge(fakes, inserted, horizon, sched.mu)
        probes = events.times if (calibration and config.eve.axis == "event") else None
        dets, s = observe(timeline, config.eve, table, probe_times=probes,
                          seed=[config.base_seed, r])
        series.append(s)
        detections_all.extend(dets)
        if config.eve.axis == "event":
            marks.append(burst_marks(timeline, events, config, table, probes))
        account_energy(ledger, timeline, grid)
        latencies.extend(latency_records(timeline, grid, config.hop_delay,
                                         config.delta_bound))
    length = max(len(s) for s in series)
    runs = [s.padded(length) for s in series]
    marks = [np.concatenate([m, np.zeros(length - m.size, bool)]) for m in marks]
    fa = fa_average(runs)
    outage = outage_stats(detections_all, int(fa.tests.sum()))
    lat = np.array([rec.latency for rec in latencies])
    latency = {
        "events": int(lat.size),
        "mean_latency": float(lat.mean()) if lat.size else float("nan"),
        "max_latency": float(lat.max()) if lat.size else float("nan"),
        "delta_violations": int(sum(rec.violation for rec in latencies)),
        "worst_case_ok": bool(config.latency_bound_ok),
    }
    active = ledger.node_wakeups[ledger.node_wakeups > 0]
    energy = {
        "energy_per_event": float(np.mean(ledger.per_event)) if ledger.per_event
        else float("nan"),
        "hops_per_round": ledger.total / (config.runs * config.sigma_rounds),
        "wakeup_cv": float(active.std() / active.mean()) if active.size else float("nan"),
    }
    return ExperimentResult(config, fa, runs, outage, energy, latency, calibration,
                            run_marks=marks)


def run_rates(result: ExperimentResult) -> np.ndarray:
    """Per-run mean reject rate, for runs that ran at least one test."""
    rates = [s.mean_rate() for s in result.run_series]
    return np.array([r for r in rates if not math.isnan(r)])


def pooled_se(p1, n1, p2, n2):
    """Standard error of a difference of two binomial proportions, pooled."""
    p1, n1, p2, n2 = (np.asarray(v, dtype=float) for v in (p1, n1, p2, n2))
    n = n1 + n2
    with np.errstate(invalid="ignore", divide="ignore"):
        p = (p1 * n1 + p2 * n2) / n
        return np.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))


FIG3_PANES = {
    "A": ("reference", "cumulative"),
    "B": ("group", "per_round"),
    "C": ("group", "cumulative"),
    "D": ("group", "fixed"),
}


def run_figure3(config: ExperimentConfig, table: CriticalValueTable,
                ds=(10, 100)) -> dict:
    """Fake-only false-alarm trends per round for the four panes A-D."""
    if config.event_model is not None:
        raise ValueError("figure 3 runs on fake traffic only")
    out = {}
    for pane, (variant, policy) in FIG3_PANES.items():
        for d in ds:
            cfg = config.updated(**{"scheduler.variant": variant, "scheduler.d": d,
                                    "eve.window_policy": policy, "eve.axis": "round"})
            out[f"fig3{pane}_d{d}"] = run_experiment(cfg, table)
    return out


def _event_sweep(config, table, models: dict, ds) -> dict:
    out = {}
    for d in ds:
        base = config.updated(**{"scheduler.d": d, "eve.window_policy": "fixed",
                                 "eve.axis": "event"})
        pure = replace(base, event_model=EventModel("pure", base.scheduler.mu))
        out[f"baseline_d{d}"] = run_experiment(pure, table, calibration=True)
        for label, model in models.items():
            out[f"{label}_d{d}"] = run_experiment(replace(base, event_model=model), table)
    return out


def run_figure4(config: ExperimentConfig, table: CriticalValueTable, ds=(10, 100)) -> dict:
    """Poisson real events, clean (a) and with 20% outlier gaps (b-d)."""
    mu = config.scheduler.mu
    models = {"fig4a": EventModel("pure", mu)}
    for pane, q in zip("bcd", (1000, 100, 10)):
        models[f"fig4{pane}"] = EventModel("perturbed", mu, perturb_fraction=0.2,
                                           perturb_mean=mu / q)
    return _event_sweep(config, table, models, ds)


def run_figure5(config: ExperimentConfig, table: CriticalValueTable, ds=(10, 100),
                burst_round: int | None = None) -> dict:
    """One burst of 10 events with pauses mu/1000, mu/100, mu/10 (a-c)."""
    mu = config.scheduler.mu
    if burst_round is None:
        burst_round = config.sigma_rounds // 2
    models = {f"fig5{pane}": EventModel("burst", mu, burst_size=10, pause=mu / q,
                                        burst_round=burst_round)
              for pane, q in zip("abc", (1000, 100, 10))}
    return _event_sweep(config, table, models, ds)


def run_all_variants(config: ExperimentConfig, table: CriticalValueTable) -> dict:
    """Same experiment under the three fake-traffic generators.

    Returns per-variant results plus a ``report`` with each variant's mean
    reject rate, its run-level standard error and the largest pairwise
    difference expressed in pooled standard errors.
    """
    results = {v: run_experiment(config.updated(**{"scheduler.variant": v}), table)
               for v in ("reference", "baseline", "group")}
    rows = {}
    for v, res in results.items():
        rates = run_rates(res)
        se = float(rates.std(ddof=1) / np.sqrt(rates.size)) if rates.size > 1 else float("nan")
        rows[v] = {"fa_mean": float(rates.mean()) if rates.size else float("nan"),
                   "se": se, "runs": int(rates.size)}
    worst = 0.0
    names = list(rows)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            se = math.hypot(rows[a]["se"], rows[b]["se"])
            diff = abs(rows[a]["fa_mean"] - rows[b]["fa_mean"])
            worst = max(worst, diff / se if se > 0 else (0.0 if diff == 0 else math.inf))
    return {"results": results, "report": {"variants": rows, "max_pairwise_se": worst}}


def _csv_float(v) -> str:
    return repr(float(v))


SUMMARY_COLUMNS = ("outage_rate", "outage_count", "tests_run", "fa_mean",
                   "energy_per_event", "hops_per_round", "wakeup_cv", "mean_latency",
                   "max_latency", "delta_violations")

PLOT_SCRIPT = """\
# gnuplot script: gnuplot -p plot_fa.gp
set datafile separator ","
set key autotitle columnhead
set xlabel "{xlabel}"
set ylabel "false alarm rate"
set yrange [0:*]
plot "fa_series.csv" using 1:2 with linespoints title "FA", \\
     {alpha!r} with lines dashtype 2 title "alpha"
"""


def emit(result: ExperimentResult | None, directory, config: ExperimentConfig | None = None):
    """Write ``fa_series.csv``, ``summary.csv``, ``config.echo`` and
    ``plot_fa.gp`` into ``directory``; returns the written paths.

    ``result=None`` writes header-only CSVs (``config`` then supplies the echo).
    """
    os.makedirs(directory, exist_ok=True)
    cfg = result.config if result is not None else config
    paths = {}
    fa_rows = ["index,fa_rate,run_count"]
    summary_rows = [",".join(SUMMARY_COLUMNS)]
    if result is not None:
        s = result.fa_series
        fa_rows += [f"{i},{_csv_float(v)},{c}" for i, (v, c) in
                    enumerate(zip(s.values.tolist(), s.counts.tolist()))]
        vals = {"outage_rate": result.outage.outage_rate,
                "outage_count": result.outage.outage_count,
                "tests_run": result.outage.tests_run,
                "fa_mean": result.fa_mean(), **result.energy, **result.latency}
        summary_rows.append(",".join(
            _csv_float(vals[c]) if isinstance(vals[c], float) else str(vals[c])
            for c in SUMMARY_COLUMNS))
    files = {"fa_series.csv": "\n".join(fa_rows) + "\n",
             "summary.csv": "\n".join(summary_rows) + "\n"}
    if cfg is not None:
        files["config.echo"] = cfg.to_text()
        xlabel = "event number" if cfg.eve.axis == "event" else "round"
        files["plot_fa.gp"] = PLOT_SCRIPT.format(xlabel=xlabel, alpha=cfg.eve.alpha)
    for name, text in files.items():
        path = os.path.join(directory, name)
        with open(path, "w") as fh:
            fh.write(text)
        paths[name] = path
    return paths
