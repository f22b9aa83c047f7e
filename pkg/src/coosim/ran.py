"""RAN-side emulation: cell runtime state, control execution, scheduling.

Cells move between three statuses: ``active`` (transmitting and admitting
users), ``pending_off`` (commanded off, still transmitting while traffic
steering drains it), and ``off`` (sleeping, zero interference). The
coverage layer can never be commanded off. Switch commands arrive over the
bus as control requests; execution feedback flows back as control acks
(a clean-up notice to traffic steering when draining starts, completion
notices to both controller apps when the state settles), so the indication
counter stays a pure measurement-report count.

The scheduler splits each cell's resource blocks proportionally to demand:
a user needs demand / (spectral_efficiency * block_bandwidth) blocks, and
when the cell is over-subscribed every servable user gets the same fraction
of its demand. Users below the SINR floor are unservable: they get nothing,
are flagged, and hold no blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ricbus
from .radio import PropagationConfig, spectral_efficiency
from .ricbus import Message, RicBus
from .scenario import CAPACITY, COVERAGE, CellDef, NeighborMap, PowerParams, Scenario

ACTIVE = "active"
PENDING_OFF = "pending_off"
OFF = "off"

# integer mirrors for the hot path
S_ACTIVE, S_PENDING, S_OFF = 0, 1, 2
_CODE = {ACTIVE: S_ACTIVE, PENDING_OFF: S_PENDING, OFF: S_OFF}

CAUSE_XAPP = "xapp"
CAUSE_FORCED = "forced"
CAUSE_MANUAL = "manual"

RAN_NAME = "ran"
COOS_XAPP = "coos_xapp"
TS_XAPP = "ts_xapp"


class CommandRejected(RuntimeError):
    """Illegal control command (coverage switch-off, wrong state, or a
    blocked/pending target)."""


@dataclass
class StateChange:
    t_s: float
    cell_id: str
    old: str
    new: str
    cause: str


@dataclass
class CellState:
    cell_id: str
    status: str = ACTIVE
    load: float = 0.0
    blocked_until_s: float = float("-inf")
    pending_since_s: float | None = None
    log: list[StateChange] = field(default_factory=list)


def cell_power_w(status: str, load: float, power: PowerParams) -> float:
    """Affine power draw: sleep level when off, base plus a load- and
    transmit-power-proportional term otherwise."""
    if status == OFF:
        return power.p_sleep_w
    return power.p0_w + power.delta_p * load * power.p_tx_max_w


@dataclass
class ScheduleResult:
    achieved_bps: np.ndarray
    prb: np.ndarray
    outage: np.ndarray
    load: float


def schedule_network(demand_bps: np.ndarray, se_bps_hz: np.ndarray,
                     serving_idx: np.ndarray, n_cells: int,
                     n_prb: np.ndarray, prb_bw_hz: np.ndarray):
    """Vectorized proportional-share scheduling across every cell at once.

    Returns (achieved_bps, deficit_mask, load_per_cell, prb_need). Load is
    offered load: sum of requested blocks over available, clamped to 1.
    """
    rate_per_prb = se_bps_hz * prb_bw_hz[serving_idx]
    servable = rate_per_prb > 0
    safe = np.where(servable, rate_per_prb, 1.0)
    prb_need = np.where(servable, demand_bps / safe, 0.0)
    prb_sum = np.bincount(serving_idx, weights=prb_need, minlength=n_cells)
    factor = np.minimum(1.0, n_prb / np.maximum(prb_sum, 1e-300))
    achieved = np.where(servable, demand_bps * factor[serving_idx], 0.0)
    deficit = (~servable) | (factor[serving_idx] < 1.0)
    load = np.minimum(1.0, prb_sum / n_prb)
    return achieved, deficit, load, prb_need


def schedule_cell(cell: CellDef, demand_bps, sinr_db, cfg: PropagationConfig) -> ScheduleResult:
    """Single-cell scheduling of the given users."""
    demand = np.asarray(demand_bps, dtype=float)
    se = np.asarray(spectral_efficiency(np.asarray(sinr_db, dtype=float), cfg))
    serving = np.zeros(demand.shape[0], dtype=np.int64)
    achieved, deficit, load, prb_need = schedule_network(
        demand, se, serving, 1, np.array([float(cell.n_prb)]),
        np.array([cell.bandwidth_hz / cell.n_prb]))
    factor = min(1.0, cell.n_prb / prb_need.sum()) if prb_need.sum() > 0 else 1.0
    return ScheduleResult(achieved_bps=achieved, prb=prb_need * factor,
                          outage=deficit, load=float(load[0]))


def associate(rsrp_dbm_row: np.ndarray, eligible: np.ndarray) -> int:
    """Strongest eligible cell by per-block reference power; ties resolve to
    the lowest cell index (cells are ordered by id)."""
    if not eligible.any():
        raise CommandRejected("no eligible cell to associate with")
    masked = np.where(eligible, rsrp_dbm_row, -np.inf)
    return int(np.argmax(masked))


def associate_vector(rsrp_dbm: np.ndarray, eligible: np.ndarray) -> np.ndarray:
    masked = np.where(eligible[None, :], rsrp_dbm, -np.inf)
    return np.argmax(masked, axis=1)


class RanEmulator:
    """Owns cell runtime state and executes control requests from the bus.

    The engine attaches a population object exposing ``serving`` (cell index
    per user), ``rows_in_cell``, ``reassign`` and ``row_of``; handovers and
    forced drains mutate it directly.
    """

    def __init__(self, sc: Scenario, neighbors: NeighborMap, bus: RicBus,
                 t_block_s: float, cleanup_timeout_s: float):
        self.cells = sc.sorted_cells()
        self.cell_ids = tuple(c.id for c in self.cells)
        self.index_of = {cid: i for i, cid in enumerate(self.cell_ids)}
        self.states = [CellState(cell_id=cid) for cid in self.cell_ids]
        self.is_coverage = np.array([c.layer == COVERAGE for c in self.cells])
        self.is_capacity = np.array([c.layer == CAPACITY for c in self.cells])
        self.status_code = np.zeros(len(self.cells), dtype=np.int64)
        self.neighbor_idx = [np.array([self.index_of[n] for n in neighbors.of(cid)],
                                      dtype=np.int64)
                             for cid in self.cell_ids]
        self.bus = bus
        self.t_block_s = t_block_s
        self.cleanup_timeout_s = cleanup_timeout_s
        self.events: list[StateChange] = []
        self.forced_cleanups = 0
        self.forced_handover_ues = 0
        self.pop = None
        bus.subscribe(ricbus.E2, ricbus.CONTROL_REQ, self._on_control, name=RAN_NAME)

    def attach_population(self, pop) -> None:
        self.pop = pop

    # -- helpers ----------------------------------------------------------

    def transmitting_mask(self) -> np.ndarray:
        return self.status_code != S_OFF

    def active_mask(self) -> np.ndarray:
        return self.status_code == S_ACTIVE

    def n_off(self) -> int:
        return int((self.status_code == S_OFF).sum())

    def n_active_capacity(self) -> int:
        return int(((self.status_code == S_ACTIVE) & self.is_capacity).sum())

    def set_loads(self, loads: np.ndarray) -> None:
        for i, st in enumerate(self.states):
            st.load = float(loads[i])

    def _transition(self, i: int, new: str, t_s: float, cause: str) -> None:
        st = self.states[i]
        ev = StateChange(t_s=t_s, cell_id=st.cell_id, old=st.status, new=new, cause=cause)
        st.status = new
        self.status_code[i] = _CODE[new]
        st.log.append(ev)
        self.events.append(ev)

    def _block(self, i: int, until_s: float) -> None:
        group = [i, *self.neighbor_idx[i].tolist()]
        for j in group:
            st = self.states[j]
            st.blocked_until_s = max(st.blocked_until_s, until_s)

    def _ack(self, t_s: float, destination: str, payload: dict) -> None:
        self.bus.publish(Message(ricbus.E2, ricbus.CONTROL_ACK, t_s, RAN_NAME,
                                 destination, payload=payload))

    # -- control execution -------------------------------------------------

    def _on_control(self, msg: Message) -> None:
        action = msg.payload["action"]
        if action == "handover":
            self._handover(msg.t_s, msg.payload["ue_id"], msg.payload["target"])
        elif action in ("cell_off", "cell_on"):
            self.apply_cell_command(action, msg.payload["cell_id"], msg.t_s)
        else:
            raise CommandRejected(f"unknown control action {action!r}")

    def _handover(self, t_s: float, ue_id: int, target_cell: str) -> None:
        j = self.index_of[target_cell]
        if self.status_code[j] != S_ACTIVE:
            raise CommandRejected(f"handover target {target_cell} is not active")
        row = self.pop.row_of(ue_id)
        self.pop.reassign(np.array([row]), j)
        self._ack(t_s, TS_XAPP, {"event": "handover_done", "ue_id": int(ue_id),
                                 "cell_id": target_cell})

    def apply_cell_command(self, action: str, cell_id: str, t_s: float) -> None:
        if cell_id not in self.index_of:
            raise CommandRejected(f"unknown cell {cell_id!r}")
        i = self.index_of[cell_id]
        st = self.states[i]
        if t_s < st.blocked_until_s:
            raise CommandRejected(f"cell {cell_id} is blocked until {st.blocked_until_s}")
        if st.status == PENDING_OFF:
            raise CommandRejected(f"cell {cell_id} has a switch-off in progress")
        if action == "cell_off":
            if self.is_coverage[i]:
                raise CommandRejected(f"cell {cell_id} is coverage layer and must stay on")
            if st.status != ACTIVE:
                raise CommandRejected(f"cell {cell_id} is {st.status}, cannot switch off")
            self._transition(i, PENDING_OFF, t_s, CAUSE_XAPP)
            st.pending_since_s = t_s
            self._block(i, t_s + self.t_block_s)
            self._ack(t_s, TS_XAPP, {"event": "cleanup_requested", "cell_id": cell_id})
            if self.pop is None or self.pop.count_in_cell(i) == 0:
                self._complete_off(i, t_s, CAUSE_XAPP)
        elif action == "cell_on":
            if st.status != OFF:
                raise CommandRejected(f"cell {cell_id} is {st.status}, cannot switch on")
            self._transition(i, ACTIVE, t_s, CAUSE_XAPP)
            self._block(i, t_s + self.t_block_s)
            for dst in (COOS_XAPP, TS_XAPP):
                self._ack(t_s, dst, {"event": "on_done", "cell_id": cell_id})
        else:
            raise CommandRejected(f"unknown cell command {action!r}")

    def _complete_off(self, i: int, t_s: float, cause: str) -> None:
        st = self.states[i]
        self._transition(i, OFF, t_s, cause)
        st.pending_since_s = None
        st.load = 0.0
        for dst in (COOS_XAPP, TS_XAPP):
            self._ack(t_s, dst, {"event": "off_done", "cell_id": st.cell_id})

    def resolve_pending(self, t_s: float, rsrp_dbm: np.ndarray | None = None) -> None:
        """Complete drained switch-offs; force-drain any that exceeded the
        clean-up timeout (moves remaining users itself, no bus traffic)."""
        for i in np.flatnonzero(self.status_code == S_PENDING):
            st = self.states[int(i)]
            count = self.pop.count_in_cell(int(i)) if self.pop is not None else 0
            if count == 0:
                self._complete_off(int(i), t_s, CAUSE_XAPP)
            elif st.pending_since_s is not None and \
                    t_s - st.pending_since_s >= self.cleanup_timeout_s:
                rows = self.pop.rows_in_cell(int(i))
                if rsrp_dbm is None:
                    raise CommandRejected("forced drain needs link measurements")
                eligible = self.status_code == S_ACTIVE
                targets = associate_vector(rsrp_dbm[rows], eligible)
                for row, j in zip(rows, targets):
                    self.pop.reassign(np.array([row]), int(j))
                self.forced_handover_ues += int(len(rows))
                self.forced_cleanups += 1
                self._complete_off(int(i), t_s, CAUSE_FORCED)

    def manual_switch_off(self, cell_ids, t_s: float = 0.0) -> None:
        """Pre-run forced state for reference configurations; coverage cells
        are refused."""
        for cid in cell_ids:
            i = self.index_of[cid]
            if self.is_coverage[i]:
                raise CommandRejected(f"cell {cid} is coverage layer and must stay on")
            self._transition(i, OFF, t_s, CAUSE_MANUAL)
            self.states[i].load = 0.0
