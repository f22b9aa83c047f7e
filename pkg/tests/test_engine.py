import json

import numpy as np
import pytest

from coosim import engine, ricbus
from coosim.apps import CoosPolicy, RappParams
from coosim.engine import (Seeds, SimConfig, compute_outage, config_from_dict,
                           config_to_dict, detect_ping_pong, run,
                           summarize, sweep_outage_goals, write_events_csv,
                           write_msglog_ndjson, write_sweep_csv,
                           write_timeseries_csv)
from coosim.ran import CommandRejected, StateChange
from coosim.scenario import CAPACITY, COVERAGE, Site, UMA, tx_dbm_to_watts

from conftest import make_cell, make_scenario


def short_cfg(horizon=120, **kw):
    kw.setdefault("log_messages", True)
    return SimConfig(horizon_s=horizon, **kw)


@pytest.fixture(scope="module")
def quiet_run():
    """A 25 min run on a fixture small enough that nothing is ever in
    outage: the threshold controller raises the switch-off bound once and
    the idle capacity cell is turned off a minute later."""
    site = Site(id="s0", x_m=300.0, y_m=300.0, environment=UMA)
    cov = make_cell("c-cov", "s0", carrier_hz=0.773e9, bandwidth_hz=10e6,
                    n_prb=50, layer=COVERAGE)
    cap = make_cell("c-cap", "s0", layer=CAPACITY)
    sc = make_scenario([site], [cov, cap], area=(600.0, 600.0),
                       pixel_size_m=300.0, mean_demand_bps=1e4)
    return run(sc, SimConfig(horizon_s=1500, log_messages=True))


# -- KPI helpers ------------------------------------------------------------

def test_compute_outage_closed_form():
    assert compute_outage([(5.0, 30.0)]) == pytest.approx(100.0 * 5 / 30)
    assert compute_outage([(1.0, 10.0), (2.0, 10.0)]) == pytest.approx(15.0)
    assert compute_outage([]) == 0.0
    assert compute_outage([(0.0, 0.0)]) == 0.0


def _ev(t_s, cell, old, new):
    return StateChange(t_s=t_s, cell_id=cell, old=old, new=new, cause="xapp")


def test_ping_pong_two_commands_same_cell():
    events = [_ev(100.0, "c", "active", "pending_off"),
              _ev(800.0, "c", "off", "active")]
    assert detect_ping_pong(events, 1000.0, 1800.0) == 1


def test_ping_pong_ignores_drain_completion():
    # the pending->off completion belongs to the original command
    events = [_ev(100.0, "c", "active", "pending_off"),
              _ev(130.0, "c", "pending_off", "off")]
    assert detect_ping_pong(events, 1000.0, 1800.0) == 0


def test_ping_pong_needs_same_cell():
    events = [_ev(100.0, "a", "active", "pending_off"),
              _ev(200.0, "b", "active", "pending_off")]
    assert detect_ping_pong(events, 1000.0, 1800.0) == 0


def test_ping_pong_window_is_half_open():
    events = [_ev(200.0, "c", "active", "pending_off"),
              _ev(1900.0, "c", "off", "active")]
    assert detect_ping_pong(events, 1999.0, 1800.0) == 1
    # at t=2000 the window is (200, 2000]: the first event just fell out
    assert detect_ping_pong(events, 2000.0, 1800.0) == 0


# -- configuration ----------------------------------------------------------

def test_config_round_trip():
    cfg = SimConfig(horizon_s=600, policy=CoosPolicy(alpha_off=10.0),
                    rapp=RappParams(alpha_off_max=40.0),
                    switch_off_at_start=("c-cap",), outage_weighting="per_ue")
    again = config_from_dict(config_to_dict(cfg))
    assert again == cfg


def test_config_from_partial_dict():
    cfg = config_from_dict({"horizon_s": 60, "policy": {"alpha_off": 30.0}})
    assert cfg.horizon_s == 60
    assert cfg.policy.alpha_off == 30.0
    assert cfg.policy.alpha_on == 100.0  # untouched defaults survive


@pytest.mark.parametrize("doc", [
    {"does_not_exist": 1},
    {"policy": {"bogus_threshold": 5}},
    {"policy": 3},
])
def test_config_rejects_unknown_keys(doc):
    with pytest.raises(ValueError):
        config_from_dict(doc)


@pytest.mark.parametrize("kw", [
    {"tick_s": 2.0},
    {"horizon_s": 0},
    {"t_x_s": 300, "t_r_s": 300},
    {"w_pp_s": 100.0, "t_block_s": 600.0},
    {"kpm_period_s": 0},
    {"outage_weighting": "votes"},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


# -- full runs on the two-cell fixture --------------------------------------

def test_runs_are_reproducible(two_cell_scenario):
    a = run(two_cell_scenario, short_cfg(300))
    b = run(two_cell_scenario, short_cfg(300))
    assert a.digest() == b.digest()
    c = run(two_cell_scenario, short_cfg(300), seed=9)
    assert c.digest() != a.digest()
    assert c.seed_traffic == 9
    assert c.seed_shadowing == two_cell_scenario.seed_shadowing


def test_energy_is_power_integral(two_cell_scenario):
    res = run(two_cell_scenario, short_cfg(180))
    assert res.energy_j == pytest.approx(res.series.power_w.sum(), rel=1e-12)
    assert res.mean_power_w == pytest.approx(res.energy_j / 180.0, rel=1e-12)


def test_energy_matches_per_cell_accounting(two_cell_scenario):
    cfg = short_cfg(240, xapp_enabled=False, rapp_enabled=False,
                    switch_off_at_start=("c-cap",))
    res = run(two_cell_scenario, cfg)
    pc = res.per_cell
    p_tx = tx_dbm_to_watts(46.0)
    total = 0.0
    for i, _ in enumerate(pc.cell_ids):
        total += pc.ticks_transmitting[i] * 500.0
        total += 4.0 * p_tx * pc.load_seconds[i]
        total += pc.ticks_off[i] * 50.0
    assert res.energy_j == pytest.approx(total, rel=1e-9)


def test_indication_counter_identity(two_cell_scenario):
    res = run(two_cell_scenario, short_cfg(120))
    s = res.series
    ue_reports = int(s.n_ues.sum())
    cell_reports = int((2 - s.n_off).sum())
    ind = res.counters.get(ricbus.E2, ricbus.INDICATION)
    assert res.kpm_ue_reports == ue_reports
    assert res.kpm_cell_reports == cell_reports
    assert ind == ue_reports + cell_reports


def test_message_total_decomposes(two_cell_scenario):
    res = run(two_cell_scenario, short_cfg(120))
    c = res.counters
    e2_kinds = [ricbus.SETUP, ricbus.SUBSCRIPTION_REQ, ricbus.SUBSCRIPTION_RESP,
                ricbus.INDICATION, ricbus.CONTROL_REQ, ricbus.CONTROL_ACK]
    assert c.total(ricbus.E2) == sum(c.get(ricbus.E2, k) for k in e2_kinds)
    # one setup per site, one subscription round trip per (app, cell)
    assert c.get(ricbus.E2, ricbus.SETUP) == 1
    assert c.get(ricbus.E2, ricbus.SUBSCRIPTION_REQ) == 4
    assert c.get(ricbus.E2, ricbus.SUBSCRIPTION_RESP) == 4


def test_msglog_matches_counters(two_cell_scenario):
    res = run(two_cell_scenario, short_cfg(90))
    by_kind = {}
    for r in res.msglog:
        key = (r.interface, r.kind)
        by_kind[key] = by_kind.get(key, 0) + r.count
    assert by_kind == res.counters.by_kind


def test_policy_messages_on_slow_cadence(quiet_run):
    res = quiet_run
    assert len(res.policy_times) > 0
    assert all(t % 300 == 0 for t in res.policy_times)
    assert res.counters.get(ricbus.A1, ricbus.POLICY) == len(res.policy_times)
    assert len(res.rapp_history) == 4  # epochs at 300, 600, 900, 1200
    for h in res.rapp_history:
        assert set(h) == {"t_s", "beta_sys_pct", "pp", "n_off",
                          "n_active_capacity", "case", "alpha_off", "alpha_on"}
    # no outage, idle capacity present: the first epoch raises the off bound
    assert res.rapp_history[0]["case"] == 4
    assert res.rapp_history[0]["alpha_off"] == 5.0


def test_switch_commands_only_on_fast_cadence(quiet_run):
    commanded = [ev for ev in quiet_run.events
                 if (ev.old, ev.new) in {("active", "pending_off"),
                                         ("off", "active")}]
    assert commanded  # the idle capacity cell does get switched off
    assert all(ev.t_s % 60 == 0 for ev in commanded)
    # drain completions are not bound to the minute grid
    done = [ev for ev in quiet_run.events
            if (ev.old, ev.new) == ("pending_off", "off")]
    assert len(done) == len([ev for ev in commanded
                             if ev.new == "pending_off"])


def test_disabled_controllers_hold_everything_still(two_cell_scenario):
    cfg = short_cfg(400, xapp_enabled=False, rapp_enabled=False)
    res = run(two_cell_scenario, cfg)
    assert res.events == []
    assert np.all(res.series.n_off == 0)
    assert np.all(res.series.alpha_off == res.series.alpha_off[0])
    assert np.all(res.series.alpha_on == res.series.alpha_on[0])
    assert res.counters.get(ricbus.A1, ricbus.POLICY) == 0
    # user steering keeps running: every remaining command is a handover
    assert res.counters.get(ricbus.E2, ricbus.CONTROL_REQ) == res.handover_count


def test_switch_off_at_start(two_cell_scenario):
    cfg = short_cfg(120, xapp_enabled=False, rapp_enabled=False,
                    switch_off_at_start=("c-cap",))
    res = run(two_cell_scenario, cfg)
    assert np.all(res.series.n_off == 1)
    i = res.per_cell.cell_ids.index("c-cap")
    assert res.per_cell.ticks_off[i] == 120
    assert res.events[0].cause == "manual"


def test_switch_off_at_start_refuses_coverage(two_cell_scenario):
    cfg = short_cfg(60, switch_off_at_start=("c-cov",))
    with pytest.raises(CommandRejected):
        run(two_cell_scenario, cfg)


def test_kpi_window_falls_back_when_horizon_short(two_cell_scenario):
    res = run(two_cell_scenario, short_cfg(200))  # shorter than the warm-up
    assert res.kpi_mean_power_w == pytest.approx(res.mean_power_w, rel=1e-12)


def test_o1_reports_on_management_cadence(two_cell_scenario):
    res = run(two_cell_scenario, short_cfg(180))
    # one record per cell at t = 0, 60 and 120
    assert res.counters.get(ricbus.O1, ricbus.PM_REPORT) == 6


def test_per_ue_weighting_runs():
    site = Site(id="s0", x_m=1000.0, y_m=1000.0, environment=UMA)
    cov = make_cell("c-cov", "s0", carrier_hz=0.773e9, bandwidth_hz=10e6,
                    n_prb=50, layer=COVERAGE, azimuth_deg=0.0)
    cap = make_cell("c-cap", "s0", layer=CAPACITY, azimuth_deg=180.0)
    sc = make_scenario([site], [cov, cap], mean_demand_bps=4e6)
    cfg = short_cfg(120, xapp_enabled=False, rapp_enabled=False,
                    outage_weighting="per_ue", log_messages=False)
    res = run(sc, cfg)
    beta = res.series.beta_sys_pct
    assert np.all((beta >= 0.0) & (beta <= 100.0))
    assert res.kpi_mean_outage_pct > 0  # demand here overruns the low band


# -- sweeps -----------------------------------------------------------------

def test_sweep_rows_and_labels(two_cell_scenario):
    cfg = SimConfig(horizon_s=120, log_messages=False)
    rows = sweep_outage_goals(two_cell_scenario, cfg, [20.0, 10.0], seed=3)
    assert [r.goal_pct for r in rows] == [10.0, 20.0, None, None]
    assert [r.label for r in rows] == ["tandem", "tandem",
                                      "all_active", "all_capacity_off"]
    only = sweep_outage_goals(two_cell_scenario, cfg, [10.0], seed=3,
                              include_references=False)
    assert len(only) == 1


def test_sweep_requires_goals(two_cell_scenario):
    with pytest.raises(ValueError):
        sweep_outage_goals(two_cell_scenario, SimConfig(horizon_s=60), [])


# -- writers and summary ----------------------------------------------------

def test_timeseries_csv(two_cell_scenario, tmp_path):
    res = run(two_cell_scenario, short_cfg(60))
    p = tmp_path / "timeseries.csv"
    write_timeseries_csv(res, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t_s,beta_sys_pct,alpha_off,alpha_on,n_off,power_w,n_ues,offered_bps"
    assert len(lines) == 61
    assert lines[1].startswith("0,")


def test_events_csv(two_cell_scenario, tmp_path):
    cfg = short_cfg(60, xapp_enabled=False, rapp_enabled=False,
                    switch_off_at_start=("c-cap",))
    res = run(two_cell_scenario, cfg)
    p = tmp_path / "events.csv"
    write_events_csv(res, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t_s,cell_id,old,new,cause"
    assert lines[1] == "0,c-cap,active,off,manual"


def test_msglog_ndjson(two_cell_scenario, tmp_path):
    res = run(two_cell_scenario, short_cfg(60))
    p = tmp_path / "msglog.ndjson"
    write_msglog_ndjson(res, p)
    lines = p.read_text().splitlines()
    assert len(lines) == len(res.msglog)
    docs = [json.loads(ln) for ln in lines]
    assert docs[0]["kind"] == "setup"
    assert all(set(d) >= {"t_s", "interface", "kind", "source",
                          "destination", "count"} for d in docs)


def test_msglog_writer_requires_logging(two_cell_scenario, tmp_path):
    res = run(two_cell_scenario, short_cfg(60, log_messages=False))
    assert res.msglog is None
    with pytest.raises(ValueError):
        write_msglog_ndjson(res, tmp_path / "m.ndjson")


def test_sweep_csv(tmp_path):
    rows = [engine.SweepRow(goal_pct=10.0, outage_pct=9.5, power_w=1234.5,
                            label="tandem"),
            engine.SweepRow(goal_pct=None, outage_pct=2.0, power_w=2000.0,
                            label="all_active")]
    p = tmp_path / "sweep.csv"
    write_sweep_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "goal_pct,outage_pct,power_w,label"
    assert lines[1] == "10,9.5,1234.5,tandem"
    assert lines[2] == ",2,2000,all_active"


def test_summarize_mentions_the_key_numbers(two_cell_scenario):
    res = run(two_cell_scenario, short_cfg(60))
    text = summarize(res)
    assert "mean outage" in text
    assert "kW" in text
    assert "messages: E2=" in text
    assert f"traffic={res.seed_traffic}" in text
