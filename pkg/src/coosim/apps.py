"""Controller applications: switching xApp, threshold rApp, traffic steering.

The switching xApp runs on a fast cadence. Every epoch it compares each
cell's mean load over the elapsed window against two thresholds from the
current policy: an active capacity cell below ``alpha_off`` percent is a
switch-off candidate, and an off cell whose active neighbors average above
``alpha_on`` percent is a switch-on candidate. Wake-ups are processed
first (descending neighbor-mean), then switch-offs (ascending load), at
most ``k_max`` commands per epoch. Every issued command blocks the target
cell and all its neighbors for ``t_block_s`` so the loop cannot flap.

The rApp runs on a slow cadence and nudges the thresholds in five
mutually exclusive cases, first match wins:

1. outage above target and recent flapping      -> lower alpha_off
2. outage above target and some cells off       -> lower alpha_on
3. outage below target and recent flapping      -> raise alpha_on
4. outage below target and cells left to switch -> raise alpha_off
5. otherwise                                    -> no change

A policy message is emitted only when a threshold actually moved.

Traffic steering is purely reactive: it drains cells that announced a
switch-off (every user goes to its strongest active alternative) and
performs hysteresis-based handovers from per-user measurement reports.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import ricbus
from .ricbus import Message, RicBus
from .scenario import CAPACITY, NeighborMap

COOS_XAPP = "coos_xapp"
COOS_RAPP = "coos_rapp"
TS_XAPP = "ts_xapp"
RAN_NAME = "ran"


@dataclass(frozen=True)
class CoosPolicy:
    """Switching thresholds and the outage band they are steered toward.
    Thresholds are percentages of cell load."""

    alpha_off: float = 0.0
    alpha_on: float = 100.0
    target_outage_lo: float = 14.0
    target_outage_hi: float = 16.0

    def __post_init__(self):
        if not (0.0 <= self.alpha_off <= 100.0 and 0.0 <= self.alpha_on <= 100.0):
            raise ValueError("thresholds must lie in [0, 100]")
        if self.target_outage_lo >= self.target_outage_hi:
            raise ValueError("target_outage_lo must be below target_outage_hi")


@dataclass(frozen=True)
class RappParams:
    step_off: float = 5.0
    step_on: float = 5.0
    alpha_off_max: float = 50.0
    alpha_on_min: float = 20.0


@dataclass
class RappState:
    policy: CoosPolicy
    params: RappParams
    last_case: int | None = None


def rapp_case(beta_sys: float, policy: CoosPolicy, pp: int,
              n_off: int, n_active_capacity: int) -> int:
    """First matching adaptation case for the observed system state."""
    if beta_sys > policy.target_outage_hi and pp:
        return 1
    if beta_sys > policy.target_outage_hi and n_off > 0:
        return 2
    if beta_sys < policy.target_outage_lo and pp:
        return 3
    if beta_sys < policy.target_outage_lo and n_active_capacity > 0:
        return 4
    return 5


def rapp_update(state: RappState, beta_sys: float, pp: int,
                n_off: int, n_active_capacity: int) -> CoosPolicy | None:
    """Apply one adaptation step. Returns the new policy when a threshold
    moved, None otherwise; bounds clamp silently."""
    case = rapp_case(beta_sys, state.policy, pp, n_off, n_active_capacity)
    state.last_case = case
    p = state.policy
    q = state.params
    if case == 1:
        new = replace(p, alpha_off=max(0.0, p.alpha_off - q.step_off))
    elif case == 2:
        new = replace(p, alpha_on=max(q.alpha_on_min, p.alpha_on - q.step_on))
    elif case == 3:
        new = replace(p, alpha_on=min(100.0, p.alpha_on + q.step_on))
    elif case == 4:
        new = replace(p, alpha_off=min(q.alpha_off_max, p.alpha_off + q.step_off))
    else:
        new = p
    if new == p:
        return None
    state.policy = new
    return new


class BlockList:
    """Per-cell holdoff timestamps; a cell is blocked while t < until."""

    def __init__(self):
        self._until: dict[str, float] = {}

    def block(self, cell_id: str, until_s: float) -> None:
        self._until[cell_id] = max(self._until.get(cell_id, float("-inf")), until_s)

    def is_blocked(self, cell_id: str, t_s: float) -> bool:
        return t_s < self._until.get(cell_id, float("-inf"))

    def prune(self, t_s: float) -> None:
        self._until = {c: u for c, u in self._until.items() if u > t_s}

    def __len__(self) -> int:
        return len(self._until)


@dataclass(frozen=True)
class CellView:
    """What the switching xApp knows about one cell at decision time.
    load is the mean over the elapsed epoch, None when no report arrived
    (off the whole window)."""

    cell_id: str
    layer: str
    status: str
    load: float | None


@dataclass(frozen=True)
class Command:
    action: str  # "cell_off" | "cell_on"
    cell_id: str


def xapp_decide(t_s: float, cells: list[CellView], neighbors: NeighborMap,
                policy: CoosPolicy, blocks: BlockList, k_max: int = 5,
                t_block_s: float = 600.0) -> list[Command]:
    """One switching epoch. Mutates ``blocks`` for every issued command
    (cell and neighbors held off until t_s + t_block_s)."""
    by_id = {c.cell_id: c for c in cells}
    commands: list[Command] = []

    def issue(action: str, cell_id: str) -> None:
        commands.append(Command(action=action, cell_id=cell_id))
        until = t_s + t_block_s
        blocks.block(cell_id, until)
        for n in neighbors.of(cell_id):
            blocks.block(n, until)

    # wake-ups first: restoring capacity wins over harvesting more sleep
    on_candidates = []
    for c in cells:
        if c.status != "off" or blocks.is_blocked(c.cell_id, t_s):
            continue
        nbr_loads = [by_id[n].load for n in neighbors.of(c.cell_id)
                     if n in by_id and by_id[n].status == "active"
                     and by_id[n].load is not None]
        if not nbr_loads:
            continue
        mean = sum(nbr_loads) / len(nbr_loads)
        if mean * 100.0 > policy.alpha_on:
            on_candidates.append((mean, c.cell_id))
    on_candidates.sort(key=lambda t: (-t[0], t[1]))
    for mean, cid in on_candidates:
        if len(commands) >= k_max:
            break
        if blocks.is_blocked(cid, t_s):
            continue
        issue("cell_on", cid)

    off_candidates = []
    for c in cells:
        if c.status != "active" or c.layer != CAPACITY:
            continue
        if c.load is None or blocks.is_blocked(c.cell_id, t_s):
            continue
        if c.load * 100.0 < policy.alpha_off:
            off_candidates.append((c.load, c.cell_id))
    off_candidates.sort(key=lambda t: (t[0], t[1]))
    for load, cid in off_candidates:
        if len(commands) >= k_max:
            break
        if blocks.is_blocked(cid, t_s):
            continue
        issue("cell_off", cid)

    blocks.prune(t_s)
    return commands


class CoosXapp:
    """Message-driven wrapper: accumulates per-cell load reports, mirrors
    cell statuses from execution acks, accepts policy updates, and turns
    :func:`xapp_decide` output into control requests."""

    def __init__(self, cell_ids, layers, neighbors: NeighborMap,
                 policy: CoosPolicy, bus: RicBus, k_max: int = 5,
                 t_block_s: float = 600.0):
        self.cell_ids = tuple(cell_ids)
        self.layers = dict(zip(self.cell_ids, layers))
        self.neighbors = neighbors
        self.policy = policy
        self.bus = bus
        self.k_max = k_max
        self.t_block_s = t_block_s
        self.blocks = BlockList()
        self.status = {cid: "active" for cid in self.cell_ids}
        self._load_sum = {cid: 0.0 for cid in self.cell_ids}
        self._load_n = {cid: 0 for cid in self.cell_ids}
        bus.subscribe(ricbus.E2, ricbus.INDICATION, self._on_indication, name=COOS_XAPP)
        bus.subscribe(ricbus.E2, ricbus.CONTROL_ACK, self._on_ack, name=COOS_XAPP)
        bus.subscribe(ricbus.A1, ricbus.POLICY, self._on_policy, name=COOS_XAPP)

    def note_initial_status(self, cell_id: str, status: str) -> None:
        self.status[cell_id] = status

    def _on_indication(self, msg: Message) -> None:
        if msg.destination != COOS_XAPP:
            return
        p = msg.payload
        for i, load in zip(p["cell_idx"], p["loads"]):
            cid = self.cell_ids[int(i)]
            self._load_sum[cid] += float(load)
            self._load_n[cid] += 1

    def _on_ack(self, msg: Message) -> None:
        event = msg.payload.get("event")
        if event == "cleanup_requested":
            self.status[msg.payload["cell_id"]] = "pending_off"
        elif event == "off_done":
            if msg.destination == COOS_XAPP:
                self.status[msg.payload["cell_id"]] = "off"
        elif event == "on_done":
            if msg.destination == COOS_XAPP:
                self.status[msg.payload["cell_id"]] = "active"

    def _on_policy(self, msg: Message) -> None:
        p = msg.payload
        self.policy = CoosPolicy(alpha_off=p["alpha_off"], alpha_on=p["alpha_on"],
                                 target_outage_lo=p["target_outage_lo"],
                                 target_outage_hi=p["target_outage_hi"])

    def on_epoch(self, t_s: float) -> list[Command]:
        views = []
        for cid in self.cell_ids:
            n = self._load_n[cid]
            load = self._load_sum[cid] / n if n else None
            views.append(CellView(cell_id=cid, layer=self.layers[cid],
                                  status=self.status[cid], load=load))
        commands = xapp_decide(t_s, views, self.neighbors, self.policy,
                               self.blocks, self.k_max, self.t_block_s)
        for cmd in commands:
            self.bus.publish(Message(ricbus.E2, ricbus.CONTROL_REQ, t_s, COOS_XAPP,
                                     RAN_NAME, payload={"action": cmd.action,
                                                        "cell_id": cmd.cell_id}))
        for cid in self.cell_ids:
            self._load_sum[cid] = 0.0
            self._load_n[cid] = 0
        return commands


class CoosRapp:
    """Slow-loop threshold adaptation; publishes a policy message to the
    switching xApp whenever a threshold moves."""

    def __init__(self, policy: CoosPolicy, params: RappParams, bus: RicBus):
        self.state = RappState(policy=policy, params=params)
        self.bus = bus
        self.policy_times: list[float] = []

    @property
    def policy(self) -> CoosPolicy:
        return self.state.policy

    def on_epoch(self, t_s: float, beta_sys: float, pp: int,
                 n_off: int, n_active_capacity: int) -> CoosPolicy | None:
        new = rapp_update(self.state, beta_sys, pp, n_off, n_active_capacity)
        if new is not None:
            self.policy_times.append(t_s)
            self.bus.publish(Message(ricbus.A1, ricbus.POLICY, t_s, COOS_RAPP,
                                     COOS_XAPP,
                                     payload={"alpha_off": new.alpha_off,
                                              "alpha_on": new.alpha_on,
                                              "target_outage_lo": new.target_outage_lo,
                                              "target_outage_hi": new.target_outage_hi}))
        return new


def ts_on_cell_to_be_off(ue_rows: np.ndarray, rsrp_dbm: np.ndarray,
                         eligible: np.ndarray) -> list[tuple[int, int]]:
    """Drain plan for a cell being switched off: every listed user goes to
    its strongest eligible cell."""
    out = []
    for row in ue_rows:
        masked = np.where(eligible, rsrp_dbm[row], -np.inf)
        out.append((int(row), int(np.argmax(masked))))
    return out


def ts_mobility(rsrp_dbm: np.ndarray, serving_idx: np.ndarray,
                eligible: np.ndarray, hysteresis_db: float = 3.0) -> list[tuple[int, int]]:
    """Hysteresis handovers: move a user when some eligible cell beats its
    serving cell by more than the hysteresis margin."""
    if rsrp_dbm.shape[0] == 0:
        return []
    masked = np.where(eligible[None, :], rsrp_dbm, -np.inf)
    best = np.argmax(masked, axis=1)
    rows = np.arange(rsrp_dbm.shape[0])
    gain = masked[rows, best] - rsrp_dbm[rows, serving_idx]
    move = (best != serving_idx) & (gain > hysteresis_db)
    return [(int(r), int(best[r])) for r in np.flatnonzero(move)]


class TrafficSteeringXapp:
    """Reacts synchronously to each measurement batch: drains cells whose
    switch-off was announced, then applies hysteresis handovers."""

    def __init__(self, cell_ids, bus: RicBus, hysteresis_db: float = 3.0):
        self.cell_ids = tuple(cell_ids)
        self.index_of = {cid: i for i, cid in enumerate(self.cell_ids)}
        self.bus = bus
        self.hysteresis_db = hysteresis_db
        self.status = {cid: "active" for cid in self.cell_ids}
        self.handover_count = 0
        bus.subscribe(ricbus.E2, ricbus.INDICATION, self._on_indication, name=TS_XAPP)
        bus.subscribe(ricbus.E2, ricbus.CONTROL_ACK, self._on_ack, name=TS_XAPP)

    def note_initial_status(self, cell_id: str, status: str) -> None:
        self.status[cell_id] = status

    def _on_ack(self, msg: Message) -> None:
        event = msg.payload.get("event")
        if event == "cleanup_requested":
            self.status[msg.payload["cell_id"]] = "pending_off"
        elif event == "off_done" and msg.destination == TS_XAPP:
            self.status[msg.payload["cell_id"]] = "off"
        elif event == "on_done" and msg.destination == TS_XAPP:
            self.status[msg.payload["cell_id"]] = "active"

    def _eligible(self) -> np.ndarray:
        return np.array([self.status[cid] == "active" for cid in self.cell_ids])

    def _on_indication(self, msg: Message) -> None:
        if msg.destination != TS_XAPP:
            return
        p = msg.payload
        ue_ids = p["ue_ids"]
        serving = p["serving_idx"]
        rsrp = p["rsrp_dbm"]
        eligible = self._eligible()
        pending = np.array([self.status[cid] == "pending_off" for cid in self.cell_ids])
        moves: list[tuple[int, int]] = []
        draining = pending[serving]
        if draining.any():
            moves.extend(ts_on_cell_to_be_off(np.flatnonzero(draining), rsrp, eligible))
        stay = np.flatnonzero(~draining)
        if stay.size:
            for r, tgt in ts_mobility(rsrp[stay], serving[stay], eligible,
                                      self.hysteresis_db):
                moves.append((int(stay[r]), tgt))
        for row, target in moves:
            self.handover_count += 1
            self.bus.publish(Message(ricbus.E2, ricbus.CONTROL_REQ, msg.t_s, TS_XAPP,
                                     RAN_NAME,
                                     payload={"action": "handover",
                                              "ue_id": int(ue_ids[row]),
                                              "target": self.cell_ids[target]}))
