import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slpsim.event_process import EventModel
from slpsim.experiment import (SUMMARY_COLUMNS, ExperimentConfig, emit,
                               pooled_se, run_all_variants, run_experiment, run_figure3,
                               run_figure4, run_figure5, run_rates, run_seeds)


def _quick(**changes):
    base = ExperimentConfig(runs=3)
    return base.updated(**changes) if changes else base


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.scheduler.n == 1024 and cfg.scheduler.d == 100
    assert cfg.eve.window == 200 and cfg.eve.alpha == 0.01
    assert (cfg.sigma_rounds, cfg.runs) == (80, 250)
    assert cfg.hop_delay == pytest.approx(0.1 / 62)
    assert cfg.latency_bound_ok


@pytest.mark.parametrize("kwargs", [dict(grid_side=10), dict(sigma_rounds=0), dict(runs=0),
                                    dict(delta_bound=0.0), dict(hop_delay=-1.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_event_mu_must_match():
    with pytest.raises(ValueError):
        ExperimentConfig(event_model=EventModel(mu=2.0))


def test_updated_dotted_keys():
    cfg = ExperimentConfig().updated(**{"scheduler.d": 10, "eve.axis": "round",
                                        "base_seed": 7, "event.kind": "burst"})
    assert cfg.scheduler.d == 10 and cfg.eve.axis == "round"
    assert cfg.scheduler.seed == 7 and cfg.event_model.kind == "burst"
    assert cfg.updated(**{"event.kind": None}).event_model is None
    with pytest.raises(KeyError):
        cfg.updated(bogus=1)


def test_updated_grid_side_resizes():
    cfg = ExperimentConfig().updated(**{"grid_side": 20, "scheduler.d": 10})
    assert cfg.scheduler.n == 400
    assert cfg.hop_delay == pytest.approx(0.1 / 38)
    assert ExperimentConfig(hop_delay=0.001).updated(runs=3).hop_delay == 0.001


def test_partial_config_text_uses_defaults():
    cfg = ExperimentConfig.from_text("# two overrides\nscheduler.d = 10\nruns = 5\n")
    assert cfg == ExperimentConfig(runs=5).updated(**{"scheduler.d": 10})
    assert ExperimentConfig.from_text("") == ExperimentConfig()


@pytest.mark.parametrize("cfg", [
    ExperimentConfig(),
    ExperimentConfig(event_model=EventModel("perturbed", perturb_fraction=0.2,
                                            perturb_mean=0.1)),
    ExperimentConfig(event_model=EventModel("burst", pause=1 / 3, burst_offset=0.125),
                     hop_delay=0.003, base_seed=99),
])
def test_config_text_round_trip(cfg):
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 0.5), st.integers(0, 2**31), st.sampled_from(["fixed", "cumulative"]))
def test_config_round_trip_property(delta, seed, policy):
    cfg = ExperimentConfig(delta_bound=delta, base_seed=seed).updated(
        **{"eve.window_policy": policy, "eve.axis": "round"})
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg


def test_config_text_errors():
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("runs 5\n")
    with pytest.raises(KeyError):
        ExperimentConfig.from_text("nosuch.key = 1\n")
    with pytest.raises(KeyError):
        ExperimentConfig.from_text("scheduler.colour = red\n")


def test_run_seeds_independent_streams():
    a = run_seeds(1, 0, 1).random(3)
    assert np.array_equal(a, run_seeds(1, 0, 1).random(3))
    assert not np.array_equal(a, run_seeds(1, 0, 2).random(3))
    assert not np.array_equal(a, run_seeds(1, 1, 1).random(3))


def test_pooled_se():
    assert pooled_se(0.01, 100, 0.01, 100) == pytest.approx(math.sqrt(0.01 * 0.99 * 0.02))
    assert pooled_se(0.0, 10, 0.0, 10) == 0.0


def test_event_axis_needs_model(table):
    with pytest.raises(ValueError):
        run_experiment(_quick(), table)


def test_run_experiment_deterministic(table, tmp_path):
    cfg = replace(_quick(), event_model=EventModel("pure"))
    for k in range(2):
        emit(run_experiment(cfg, table), tmp_path / str(k))
    for name in ("fa_series.csv", "summary.csv", "config.echo", "plot_fa.gp"):
        assert (tmp_path / "0" / name).read_bytes() == (tmp_path / "1" / name).read_bytes()


def test_shared_events_across_variants(table):
    cfg = replace(_quick(), event_model=EventModel("pure"))
    lat = {v: run_experiment(cfg.updated(**{"scheduler.variant": v}), table).latency
           for v in ("reference", "group", "baseline")}
    assert lat["reference"] == lat["group"] == lat["baseline"]


def test_result_contents(table):
    cfg = replace(_quick(), event_model=EventModel("pure"))
    res = run_experiment(cfg, table)
    assert res.fa_series.run_count == 3 and len(res.run_series) == 3
    assert res.latency["delta_violations"] == 0 and res.latency["worst_case_ok"]
    assert res.latency["max_latency"] <= cfg.delta_bound
    assert res.energy["hops_per_round"] > 100 * 15
    assert 0 <= res.outage.outage_rate <= 1
    assert run_rates(res).size == 3


def test_calibration_probes_match_event_positions(table):
    cfg = replace(_quick(), event_model=EventModel("pure"))
    real, calib = run_experiment(cfg, table), run_experiment(cfg, table, calibration=True)
    assert calib.calibration
    assert len(real.fa_series) == len(calib.fa_series)
    assert calib.latency["events"] == 0
    # event-free traffic: every reject is an outage
    assert calib.outage.outage_count == round(np.nansum(
        [np.nansum(s.values) for s in calib.run_series]))


def test_burst_marks_cover_burst_windows(table):
    model = EventModel("burst", burst_round=40, pause=0.001)
    cfg = replace(_quick(), event_model=model)
    res = run_experiment(cfg, table)
    calib = run_experiment(cfg, table, calibration=True)
    for marks, marks_c in zip(res.run_marks, calib.run_marks):
        # the ten burst events themselves plus the events shortly after them
        assert 10 <= marks.sum() <= 30
        assert 10 <= marks_c.sum() <= 30


def test_burst_marks_no_burst(table):
    cfg = replace(_quick(), event_model=EventModel())
    res = run_experiment(cfg, table)
    assert all(m.dtype == bool and not m.any() for m in res.run_marks)


def test_fa_series_rows_match_axis(table, tmp_path):
    cfg = _quick(**{"eve.axis": "round"})
    emit(run_experiment(cfg, table), tmp_path / "r")
    assert len((tmp_path / "r" / "fa_series.csv").read_text().splitlines()) == 81
    one = replace(ExperimentConfig(runs=1), event_model=EventModel("pure"))
    res = run_experiment(one, table)
    emit(res, tmp_path / "e")
    rows = (tmp_path / "e" / "fa_series.csv").read_text().splitlines()
    assert len(rows) - 1 == res.latency["events"]


def test_emit_empty_result(tmp_path):
    cfg = ExperimentConfig()
    paths = emit(None, tmp_path, config=cfg)
    assert (tmp_path / "fa_series.csv").read_text() == "index,fa_rate,run_count\n"
    assert (tmp_path / "summary.csv").read_text() == ",".join(SUMMARY_COLUMNS) + "\n"
    assert ExperimentConfig.load(paths["config.echo"]) == cfg
    assert "gnuplot" in (tmp_path / "plot_fa.gp").read_text()


def test_figure3_panes(table):
    out = run_figure3(_quick(runs=2), table, ds=(100,))
    assert sorted(out) == ["fig3A_d100", "fig3B_d100", "fig3C_d100", "fig3D_d100"]
    assert out["fig3A_d100"].config.scheduler.variant == "reference"
    assert out["fig3B_d100"].config.eve.window_policy == "per_round"
    with pytest.raises(ValueError):
        run_figure3(replace(_quick(), event_model=EventModel()), table)


def test_figure4_and_5_configs(table):
    f4 = run_figure4(_quick(runs=1), table, ds=(100,))
    assert sorted(f4) == ["baseline_d100", "fig4a_d100", "fig4b_d100", "fig4c_d100",
                          "fig4d_d100"]
    assert f4["fig4d_d100"].config.event_model.perturb_mean == pytest.approx(0.1)
    assert f4["fig4d_d100"].config.event_model.perturb_fraction == 0.2
    f5 = run_figure5(_quick(runs=1), table, ds=(100,))
    m = f5["fig5a_d100"].config.event_model
    assert (m.kind, m.burst_size, m.pause, m.burst_round) == ("burst", 10, 0.001, 40)
    assert f5["fig5c_d100"].config.event_model.pause == pytest.approx(0.1)


def test_variants_differ_for_single_dummy(table):
    cfg = ExperimentConfig(runs=20).updated(**{"scheduler.d": 1, "eve.axis": "round",
                                               "eve.window": 20, "sigma_rounds": 400})
    report = run_all_variants(cfg, table)["report"]
    rates = {v: row["fa_mean"] for v, row in report["variants"].items()}
    assert rates["group"] > 0.2
    assert rates["reference"] < 0.05
    assert report["max_pairwise_se"] > 10
