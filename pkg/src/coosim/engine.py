"""Discrete-time simulation engine and run-level accounting.

One run advances a 1 s master clock over the scenario. Within each tick the
phases are fixed: departures, arrivals, mobility, link update, association,
traffic steering (drains then hysteresis handovers), switch-off completion,
scheduling, measurement reporting, recording, then the switching xApp on
its fast cadence and the threshold rApp on its slow cadence. Commands
issued at tick t therefore take effect from tick t+1, except that an empty
cell commanded off completes within the same tick.

Everything downstream of the two seeds (traffic, shadowing) is
deterministic; two runs of the same scenario, config and seeds produce
bit-identical results including message logs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import ricbus
from .apps import (COOS_XAPP, TS_XAPP, CoosPolicy, CoosRapp, CoosXapp, RappParams,
                   TrafficSteeringXapp)
from .radio import LinkModel, PropagationConfig, db_to_linear, generate_shadow_field, \
    spectral_efficiency
from .ran import (ACTIVE, OFF, PENDING_OFF, RAN_NAME, RanEmulator, S_ACTIVE, S_OFF,
                  StateChange, associate_vector, schedule_network)
from .ricbus import Counters, LogRecord, Message, RicBus
from .scenario import Scenario, build_neighbor_map
from .traffic import ArrivalConfig, TrafficSource, advance_positions

NEAR_RT_RIC = "near_rt_ric"
SMO = "smo"


@dataclass(frozen=True)
class Seeds:
    traffic: int = 1
    shadowing: int | None = None  # None: use the scenario's pinned seed


@dataclass(frozen=True)
class SimConfig:
    horizon_s: int = 86400
    tick_s: float = 1.0
    t_x_s: int = 60            # switching xApp cadence
    t_r_s: int = 300           # threshold rApp cadence
    t_block_s: float = 600.0   # holdoff after any switch command
    w_pp_s: float = 1800.0     # flap-detection window
    kpm_period_s: int = 1      # per-cell load report cadence
    o1_period_s: int = 60      # management-plane report cadence
    warmup_s: float = 7200.0   # excluded from reported KPI means
    cleanup_timeout_s: float = 30.0
    neighbor_radius_m: float = 1500.0
    k_max_commands: int = 5
    hysteresis_db: float = 3.0
    seeds: Seeds = Seeds()
    propagation: PropagationConfig = PropagationConfig()
    arrival: ArrivalConfig = ArrivalConfig()
    policy: CoosPolicy = CoosPolicy()
    rapp: RappParams = RappParams()
    xapp_enabled: bool = True
    rapp_enabled: bool = True
    switch_off_at_start: tuple[str, ...] = ()
    log_messages: bool = True
    outage_weighting: str = "ue_seconds"  # or "per_ue"

    def __post_init__(self):
        if self.tick_s != 1.0:
            raise ValueError("the master tick is fixed at 1 s")
        if self.horizon_s <= 0:
            raise ValueError("horizon_s must be positive")
        if not self.t_x_s < self.t_r_s:
            raise ValueError("the xApp cadence must be shorter than the rApp cadence")
        if self.w_pp_s < self.t_block_s:
            raise ValueError("w_pp_s must be at least t_block_s")
        if self.kpm_period_s < 1 or self.o1_period_s < 1:
            raise ValueError("report periods must be at least one tick")
        if self.outage_weighting not in ("ue_seconds", "per_ue"):
            raise ValueError("outage_weighting must be 'ue_seconds' or 'per_ue'")


def config_to_dict(cfg: SimConfig) -> dict:
    def enc(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: enc(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return list(obj)
        return obj
    return enc(cfg)


def config_from_dict(doc: dict) -> SimConfig:
    """Build a config from a (possibly partial) plain dict, e.g. a JSON run
    config file. Unknown keys raise."""
    doc = dict(doc)
    sub = {
        "seeds": Seeds,
        "propagation": PropagationConfig,
        "arrival": ArrivalConfig,
        "policy": CoosPolicy,
        "rapp": RappParams,
    }
    kwargs = {}
    for key, value in doc.items():
        if key in sub:
            if not isinstance(value, dict):
                raise ValueError(f"config section {key!r} must be an object")
            known = {f.name for f in dataclasses.fields(sub[key])}
            bad = set(value) - known
            if bad:
                raise ValueError(f"unknown keys in config section {key!r}: {sorted(bad)}")
            value = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
            kwargs[key] = sub[key](**value)
        else:
            known = {f.name for f in dataclasses.fields(SimConfig)}
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = tuple(value) if isinstance(value, list) else value
    return SimConfig(**kwargs)


# ---------------------------------------------------------------------------
# KPI helpers

def compute_outage(records) -> float:
    """Share of user-seconds in deficit, as a percentage.

    records is an iterable of (ue_seconds_in_deficit, ue_seconds_total)
    pairs, one per tick. An empty window counts as zero outage.
    """
    deficit = 0.0
    total = 0.0
    for d, n in records:
        deficit += d
        total += n
    if total <= 0:
        return 0.0
    return 100.0 * deficit / total


_SWITCH_EVENTS = {(ACTIVE, PENDING_OFF), (OFF, ACTIVE)}


def detect_ping_pong(events, t_s: float, w_pp_s: float) -> int:
    """1 when any cell saw two switch commands inside (t_s - w_pp_s, t_s].

    Only command-initiating transitions count (entering pending_off,
    leaving off); the drain completion belongs to the same command as its
    start and must not read as a second change.
    """
    lo = t_s - w_pp_s
    seen: dict[str, int] = {}
    for ev in events:
        if lo < ev.t_s <= t_s and (ev.old, ev.new) in _SWITCH_EVENTS:
            seen[ev.cell_id] = seen.get(ev.cell_id, 0) + 1
            if seen[ev.cell_id] >= 2:
                return 1
    return 0


# ---------------------------------------------------------------------------
# Run results

@dataclass
class TimeSeries:
    t_s: np.ndarray
    beta_sys_pct: np.ndarray
    alpha_off: np.ndarray
    alpha_on: np.ndarray
    n_off: np.ndarray
    power_w: np.ndarray
    n_ues: np.ndarray
    offered_bps: np.ndarray

    COLUMNS = ("t_s", "beta_sys_pct", "alpha_off", "alpha_on", "n_off",
               "power_w", "n_ues", "offered_bps")


@dataclass
class PerCellStats:
    cell_ids: tuple[str, ...]
    is_capacity: np.ndarray
    ticks_transmitting: np.ndarray
    ticks_off: np.ndarray
    load_seconds: np.ndarray  # integral of load while transmitting


@dataclass
class RunResult:
    series: TimeSeries
    events: list[StateChange]
    counters: Counters
    msglog: list[LogRecord] | None
    per_cell: PerCellStats
    energy_j: float
    mean_power_w: float
    kpi_mean_power_w: float
    kpi_mean_outage_pct: float
    kpm_ue_reports: int
    kpm_cell_reports: int
    handover_count: int
    forced_cleanups: int
    forced_handover_ues: int
    policy_times: list[float]
    rapp_history: list[dict]
    seed_traffic: int
    seed_shadowing: int
    config: SimConfig

    def digest(self) -> str:
        """Stable content hash over series, events, counters and message log."""
        h = hashlib.sha256()
        for name in TimeSeries.COLUMNS:
            h.update(np.ascontiguousarray(getattr(self.series, name)).tobytes())
        for ev in self.events:
            h.update(f"{ev.t_s}|{ev.cell_id}|{ev.old}|{ev.new}|{ev.cause}\n".encode())
        for key in sorted(self.counters.by_kind):
            h.update(f"{key}={self.counters.by_kind[key]}\n".encode())
        if self.msglog is not None:
            for r in self.msglog:
                h.update(f"{r.t_s}|{r.interface}|{r.kind}|{r.source}|"
                         f"{r.destination}|{r.count}|{r.payload}\n".encode())
        return h.hexdigest()


class SimulationError(RuntimeError):
    """An engine invariant was violated mid-run."""


# ---------------------------------------------------------------------------
# Population (struct of arrays)

class _Population:
    def __init__(self):
        self.ids = np.empty(0, dtype=np.int64)
        self.pixel = np.empty(0, dtype=np.int64)
        self.pos = np.empty((0, 2))
        self.origin = np.empty((0, 2))
        self.waypoint = np.empty((0, 2))
        self.speed = np.empty(0)
        self.demand = np.empty(0)
        self.departs_at = np.empty(0)
        self.serving = np.empty(0, dtype=np.int64)
        self.win_deficit = np.empty(0, dtype=bool)
        self._row_of: dict[int, int] = {}

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    def _reindex(self) -> None:
        self._row_of = {int(u): i for i, u in enumerate(self.ids)}

    def add(self, batch: dict) -> None:
        k = batch["id"].shape[0]
        if k == 0:
            return
        self.ids = np.concatenate([self.ids, batch["id"]])
        self.pixel = np.concatenate([self.pixel, batch["pixel"]])
        self.pos = np.concatenate([self.pos, batch["pos"]])
        self.origin = np.concatenate([self.origin, batch["origin"]])
        self.waypoint = np.concatenate([self.waypoint, batch["waypoint"]])
        self.speed = np.concatenate([self.speed, batch["speed"]])
        self.demand = np.concatenate([self.demand, batch["demand"]])
        self.departs_at = np.concatenate([self.departs_at, batch["departs_at"]])
        self.serving = np.concatenate([self.serving, np.full(k, -1, dtype=np.int64)])
        self.win_deficit = np.concatenate([self.win_deficit, np.zeros(k, dtype=bool)])
        self._reindex()

    def remove(self, drop_mask: np.ndarray) -> tuple[int, int]:
        """Drop rows; returns (count removed, count removed with a window
        deficit) for per-user outage accounting."""
        if not drop_mask.any():
            return 0, 0
        removed = int(drop_mask.sum())
        removed_def = int(self.win_deficit[drop_mask].sum())
        keep = ~drop_mask
        for name in ("ids", "pixel", "pos", "origin", "waypoint", "speed",
                     "demand", "departs_at", "serving", "win_deficit"):
            setattr(self, name, getattr(self, name)[keep])
        self._reindex()
        return removed, removed_def

    def reassign(self, rows: np.ndarray, target_idx: int) -> None:
        self.serving[rows] = target_idx

    def rows_in_cell(self, cell_idx: int) -> np.ndarray:
        return np.flatnonzero(self.serving == cell_idx)

    def count_in_cell(self, cell_idx: int) -> int:
        return int((self.serving == cell_idx).sum())

    def row_of(self, ue_id: int) -> int:
        return self._row_of[int(ue_id)]


# ---------------------------------------------------------------------------
# Main loop

def run(sc: Scenario, config: SimConfig, seed: int | None = None,
        progress=None) -> RunResult:
    """Simulate one run. ``seed`` overrides the traffic seed from the
    config; the shadowing seed falls back to the scenario's pinned value."""
    seed_traffic = int(seed) if seed is not None else config.seeds.traffic
    seed_shadow = (config.seeds.shadowing if config.seeds.shadowing is not None
                   else sc.seed_shadowing)

    neighbors = build_neighbor_map(sc, config.neighbor_radius_m)
    shadow = generate_shadow_field(sc, config.propagation, seed_shadow)
    links = LinkModel(sc, config.propagation, shadow)
    rng = np.random.default_rng(seed_traffic)
    source = TrafficSource(sc, config.arrival, rng)
    bus = RicBus(keep_log=config.log_messages)

    ran = RanEmulator(sc, neighbors, bus, config.t_block_s, config.cleanup_timeout_s)
    cells = ran.cells
    cell_ids = ran.cell_ids
    n_cells = len(cells)
    xapp = CoosXapp(cell_ids, [c.layer for c in cells], neighbors, config.policy,
                    bus, k_max=config.k_max_commands, t_block_s=config.t_block_s)
    rapp = CoosRapp(config.policy, config.rapp, bus)
    ts = TrafficSteeringXapp(cell_ids, bus, hysteresis_db=config.hysteresis_db)

    pop = _Population()
    ran.attach_population(pop)

    if config.switch_off_at_start:
        ran.manual_switch_off(config.switch_off_at_start, t_s=0.0)
        for cid in config.switch_off_at_start:
            xapp.note_initial_status(cid, OFF)
            ts.note_initial_status(cid, OFF)

    # E2 bring-up accounting: one setup per site, one subscription handshake
    # per app and cell
    for site in sc.sites:
        bus.publish(Message(ricbus.E2, ricbus.SETUP, 0.0, site.id, NEAR_RT_RIC))
    for app in (COOS_XAPP, TS_XAPP):
        for cid in cell_ids:
            bus.publish(Message(ricbus.E2, ricbus.SUBSCRIPTION_REQ, 0.0, app, cid))
            bus.publish(Message(ricbus.E2, ricbus.SUBSCRIPTION_RESP, 0.0, cid, app))

    p0_arr = np.array([c.power.p0_w for c in cells])
    delta_arr = np.array([c.power.delta_p for c in cells])
    sleep_arr = np.array([c.power.p_sleep_w for c in cells])
    ptx_arr = np.array([c.power.p_tx_max_w for c in cells])
    nprb_arr = np.array([float(c.n_prb) for c in cells])

    horizon = int(config.horizon_s)
    series = TimeSeries(*(np.zeros(horizon) for _ in TimeSeries.COLUMNS))
    deficit_t = np.zeros(horizon)
    alive_t = np.zeros(horizon)
    ticks_tx = np.zeros(n_cells)
    ticks_off = np.zeros(n_cells)
    load_seconds = np.zeros(n_cells)
    energy_j = 0.0
    kpm_ue_reports = 0
    kpm_cell_reports = 0
    rapp_history: list[dict] = []
    win_dep_seen = 0
    win_dep_deficit = 0

    per_ue_mode = config.outage_weighting == "per_ue"

    for t in range(horizon):
        ft = float(t)
        # 1. departures
        gone = pop.departs_at <= ft
        if gone.any():
            seen, had_def = pop.remove(gone)
            win_dep_seen += seen
            win_dep_deficit += had_def
        # 2. arrivals (drawn before mobility: fixed stream order)
        batch = source.spawn(ft, config.tick_s)
        # 3. mobility for users already present
        advance_positions(pop.pos, pop.waypoint, pop.speed, pop.origin,
                          config.tick_s, rng, config.arrival, source.area_wh)
        # 4. admit arrivals
        pop.add(batch)
        n_ue = pop.n
        # 5. link state
        rec_dbm = links.received_dbm(pop.pos) if n_ue else np.empty((0, n_cells))
        rsrp = rec_dbm - links.prb_offset_db[None, :]
        # 6. associate newcomers to the strongest active cell
        new_rows = np.flatnonzero(pop.serving < 0)
        if new_rows.size:
            pop.serving[new_rows] = associate_vector(
                rsrp[new_rows], ran.status_code == S_ACTIVE)
        # 7. per-user measurement reports; traffic steering reacts in-line
        kpm_ue_reports += n_ue
        if n_ue:
            bus.publish(Message(ricbus.E2, ricbus.INDICATION, ft, RAN_NAME, TS_XAPP,
                                payload={"ue_ids": pop.ids,
                                         "serving_idx": pop.serving.copy(),
                                         "rsrp_dbm": rsrp},
                                count=n_ue))
        # 8. finish drained or timed-out switch-offs
        ran.resolve_pending(ft, rsrp if n_ue else None)
        if n_ue and (ran.status_code[pop.serving] == S_OFF).any():
            raise SimulationError(f"t={t}: a user is attached to an off cell")
        # 9. scheduling
        if n_ue:
            p_mw = db_to_linear(rec_dbm)
            sinr = links.sinr_db_vector(p_mw, pop.serving, ran.transmitting_mask())
            se = spectral_efficiency(sinr, config.propagation)
            achieved, deficit, loads, _ = schedule_network(
                pop.demand, se, pop.serving, n_cells, nprb_arr, links.prb_bw_hz)
            n_deficit = int(deficit.sum())
            if per_ue_mode:
                pop.win_deficit |= deficit
        else:
            loads = np.zeros(n_cells)
            n_deficit = 0
        ran.set_loads(loads)
        # 10. per-cell load reports at the measurement cadence
        if t % config.kpm_period_s == 0:
            reporting = np.flatnonzero(ran.status_code != S_OFF)
            if reporting.size:
                bus.publish(Message(ricbus.E2, ricbus.INDICATION, ft, RAN_NAME,
                                    COOS_XAPP,
                                    payload={"cell_idx": reporting,
                                             "loads": loads[reporting]},
                                    count=int(reporting.size)))
                kpm_cell_reports += int(reporting.size)
        # 11. management-plane reports
        if t % config.o1_period_s == 0:
            bus.publish(Message(ricbus.O1, ricbus.PM_REPORT, ft, RAN_NAME, SMO,
                                count=n_cells))
        # 12. record and integrate
        off_mask = ran.status_code == S_OFF
        power = np.where(off_mask, sleep_arr, p0_arr + delta_arr * loads * ptx_arr)
        total_power = float(power.sum())
        energy_j += total_power * config.tick_s
        ticks_off += off_mask
        ticks_tx += ~off_mask
        load_seconds += np.where(off_mask, 0.0, loads)
        deficit_t[t] = n_deficit
        alive_t[t] = n_ue
        series.t_s[t] = ft
        series.beta_sys_pct[t] = 100.0 * n_deficit / n_ue if n_ue else 0.0
        series.alpha_off[t] = xapp.policy.alpha_off
        series.alpha_on[t] = xapp.policy.alpha_on
        series.n_off[t] = int(off_mask.sum())
        series.power_w[t] = total_power
        series.n_ues[t] = n_ue
        series.offered_bps[t] = float(pop.demand.sum())
        # 13. switching epoch
        if config.xapp_enabled and t > 0 and t % config.t_x_s == 0:
            xapp.on_epoch(ft)
        # 14. threshold-adaptation epoch
        if config.rapp_enabled and t > 0 and t % config.t_r_s == 0:
            w = slice(t - config.t_r_s, t)
            if per_ue_mode:
                alive_def = int(pop.win_deficit.sum())
                denom = win_dep_seen + pop.n
                num = win_dep_deficit + alive_def
                beta = 100.0 * num / denom if denom else 0.0
                pop.win_deficit[:] = False
                win_dep_seen = win_dep_deficit = 0
            else:
                beta = compute_outage(zip(deficit_t[w], alive_t[w]))
            pp = detect_ping_pong(ran.events, ft, config.w_pp_s)
            n_off_now = ran.n_off()
            n_active_cap = ran.n_active_capacity()
            new_policy = rapp.on_epoch(ft, beta, pp, n_off_now, n_active_cap)
            rapp_history.append({"t_s": ft, "beta_sys_pct": beta, "pp": pp,
                                 "n_off": n_off_now,
                                 "n_active_capacity": n_active_cap,
                                 "case": rapp.state.last_case,
                                 "alpha_off": rapp.policy.alpha_off,
                                 "alpha_on": rapp.policy.alpha_on})
        if progress is not None and t % 3600 == 0 and t > 0:
            progress(t, horizon)

    mean_power = energy_j / (horizon * config.tick_s)
    kpi_rows = slice(int(config.warmup_s), horizon) \
        if config.warmup_s < horizon else slice(0, horizon)
    kpi_power = float(series.power_w[kpi_rows].mean())
    kpi_outage = compute_outage(zip(deficit_t[kpi_rows], alive_t[kpi_rows]))

    return RunResult(
        series=series,
        events=list(ran.events),
        counters=bus.snapshot_counters(),
        msglog=bus.log,
        per_cell=PerCellStats(cell_ids=cell_ids, is_capacity=ran.is_capacity.copy(),
                              ticks_transmitting=ticks_tx, ticks_off=ticks_off,
                              load_seconds=load_seconds),
        energy_j=energy_j,
        mean_power_w=mean_power,
        kpi_mean_power_w=kpi_power,
        kpi_mean_outage_pct=kpi_outage,
        kpm_ue_reports=kpm_ue_reports,
        kpm_cell_reports=kpm_cell_reports,
        handover_count=ts.handover_count,
        forced_cleanups=ran.forced_cleanups,
        forced_handover_ues=ran.forced_handover_ues,
        policy_times=list(rapp.policy_times),
        rapp_history=rapp_history,
        seed_traffic=seed_traffic,
        seed_shadowing=int(seed_shadow),
        config=config,
    )


# ---------------------------------------------------------------------------
# Outage-goal sweep

@dataclass
class SweepRow:
    goal_pct: float | None
    outage_pct: float
    power_w: float
    label: str  # "tandem" | "all_active" | "all_capacity_off"


def reference_configs(sc: Scenario, config: SimConfig) -> dict[str, SimConfig]:
    """Controller-free baselines: every cell on, and every capacity cell
    switched off before the run starts."""
    base = replace(config, xapp_enabled=False, rapp_enabled=False,
                   switch_off_at_start=(), log_messages=False)
    all_cap_off = replace(base, switch_off_at_start=sc.capacity_cell_ids())
    return {"all_active": base, "all_capacity_off": all_cap_off}


def sweep_outage_goals(sc: Scenario, config: SimConfig, goals,
                       seed: int | None = None, include_references: bool = True,
                       progress=None) -> list[SweepRow]:
    """One run per outage goal (same seed for comparability) plus the two
    reference rows. The target band keeps the width configured in the base
    policy, recentred on each goal."""
    goals = sorted(float(g) for g in goals)
    if not goals:
        raise ValueError("at least one outage goal required")
    half_band = (config.policy.target_outage_hi - config.policy.target_outage_lo) / 2
    rows = []
    for i, goal in enumerate(goals):
        policy = replace(config.policy, target_outage_lo=goal - half_band,
                         target_outage_hi=goal + half_band)
        cfg = replace(config, policy=policy, log_messages=False)
        if progress is not None:
            progress(f"goal {goal:g}%")
        res = run(sc, cfg, seed=seed)
        rows.append(SweepRow(goal_pct=goal, outage_pct=res.kpi_mean_outage_pct,
                             power_w=res.kpi_mean_power_w, label="tandem"))
    if include_references:
        for label, cfg in reference_configs(sc, config).items():
            if progress is not None:
                progress(label)
            res = run(sc, cfg, seed=seed)
            rows.append(SweepRow(goal_pct=None, outage_pct=res.kpi_mean_outage_pct,
                                 power_w=res.kpi_mean_power_w, label=label))
    return rows


# ---------------------------------------------------------------------------
# File output

def write_timeseries_csv(result: RunResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = TimeSeries.COLUMNS
    data = np.column_stack([getattr(result.series, c) for c in cols])
    with path.open("w") as f:
        f.write(",".join(cols) + "\n")
        for row in data:
            f.write(f"{row[0]:.0f},{row[1]:.6g},{row[2]:.6g},{row[3]:.6g},"
                    f"{row[4]:.0f},{row[5]:.6g},{row[6]:.0f},{row[7]:.6g}\n")


def write_events_csv(result: RunResult, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write("t_s,cell_id,old,new,cause\n")
        for ev in result.events:
            f.write(f"{ev.t_s:.0f},{ev.cell_id},{ev.old},{ev.new},{ev.cause}\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_msglog_ndjson(result: RunResult, path: str | Path) -> None:
    if result.msglog is None:
        raise ValueError("run was executed without message logging")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for r in result.msglog:
            doc = {"t_s": r.t_s, "interface": r.interface, "kind": r.kind,
                   "source": r.source, "destination": r.destination,
                   "count": r.count}
            if r.payload is not None:
                doc["payload"] = r.payload
            f.write(json.dumps(doc, default=_json_default) + "\n")


def write_sweep_csv(rows, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write("goal_pct,outage_pct,power_w,label\n")
        for r in rows:
            goal = f"{r.goal_pct:g}" if r.goal_pct is not None else ""
            f.write(f"{goal},{r.outage_pct:.6g},{r.power_w:.6g},{r.label}\n")


def summarize(result: RunResult) -> str:
    c = result.counters
    switch_events = sum(1 for ev in result.events
                        if (ev.old, ev.new) in _SWITCH_EVENTS)
    lines = [
        f"horizon: {result.config.horizon_s} s "
        f"(seeds: traffic={result.seed_traffic}, shadowing={result.seed_shadowing})",
        f"mean outage (post warm-up): {result.kpi_mean_outage_pct:.2f} %",
        f"mean power  (post warm-up): {result.kpi_mean_power_w / 1e3:.2f} kW",
        f"energy: {result.energy_j / 3.6e6:.1f} kWh",
        f"switch commands: {switch_events} "
        f"(forced clean-ups: {result.forced_cleanups})",
        f"handovers: {result.handover_count}",
        f"messages: E2={c.total(ricbus.E2)} A1={c.total(ricbus.A1)} "
        f"O1={c.total(ricbus.O1)}",
    ]
    return "\n".join(lines)
