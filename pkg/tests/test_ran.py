import numpy as np
import pytest

from coosim import ricbus
from coosim.radio import PropagationConfig
from coosim.ran import (ACTIVE, CAUSE_FORCED, CAUSE_MANUAL, CAUSE_XAPP,
                        CommandRejected, OFF, PENDING_OFF, RanEmulator,
                        associate, associate_vector, cell_power_w,
                        schedule_cell, schedule_network)
from coosim.ricbus import Message, RicBus
from coosim.scenario import (CAPACITY, COVERAGE, PowerParams, Site, UMA,
                             build_neighbor_map, tx_dbm_to_watts)

from conftest import make_cell, make_scenario

SE_10DB = 2.0756589711823783  # 0.6 * log2(1 + 10^1)


# -- scheduler --------------------------------------------------------------

def _one_cell(n_prb=100.0, prb_bw=200e3):
    return np.array([n_prb]), np.array([prb_bw])


def test_schedule_exact_fill_no_deficit():
    # 2.0 bps/Hz on 200 kHz blocks: 400 kbps per block. Two users at
    # 20 Mbps each need 50 blocks each, exactly the cell's 100.
    demand = np.array([20e6, 20e6])
    se = np.array([2.0, 2.0])
    serving = np.zeros(2, dtype=np.int64)
    achieved, deficit, load, prb_need = schedule_network(
        demand, se, serving, 1, *_one_cell())
    assert np.allclose(achieved, demand)
    assert not deficit.any()
    assert load[0] == pytest.approx(1.0)
    assert np.allclose(prb_need, [50.0, 50.0])


def test_schedule_oversubscribed_scales_everyone():
    # each user asks for 75 of 100 blocks; both get the same 2/3 fraction
    demand = np.array([30e6, 30e6])
    se = np.array([2.0, 2.0])
    serving = np.zeros(2, dtype=np.int64)
    achieved, deficit, load, _ = schedule_network(
        demand, se, serving, 1, *_one_cell())
    assert np.allclose(achieved, demand * (2.0 / 3.0))
    assert deficit.all()
    assert load[0] == pytest.approx(1.0)


def test_schedule_floor_user_holds_no_blocks():
    demand = np.array([1e6, 1e6])
    se = np.array([0.0, 2.0])
    serving = np.zeros(2, dtype=np.int64)
    achieved, deficit, load, prb_need = schedule_network(
        demand, se, serving, 1, *_one_cell())
    assert achieved[0] == 0.0
    assert deficit[0]
    assert prb_need[0] == 0.0
    # the servable user is untouched by the unservable one
    assert achieved[1] == pytest.approx(1e6)
    assert not deficit[1]
    assert load[0] == pytest.approx(2.5 / 100.0)


def test_schedule_cells_are_independent():
    demand = np.array([48e6, 4e6])
    se = np.array([2.0, 2.0])
    serving = np.array([0, 1], dtype=np.int64)
    n_prb = np.array([100.0, 100.0])
    prb_bw = np.array([200e3, 200e3])
    achieved, deficit, load, _ = schedule_network(
        demand, se, serving, 2, n_prb, prb_bw)
    # cell 0 asks 120 blocks and saturates; cell 1 asks 10 and does not
    assert achieved[0] == pytest.approx(48e6 * (100.0 / 120.0))
    assert deficit[0] and not deficit[1]
    assert achieved[1] == pytest.approx(4e6)
    assert load == pytest.approx([1.0, 0.1])


def test_schedule_prb_need_formula():
    demand = np.array([3.3e6, 0.7e6])
    se = np.array([1.25, 4.4])
    serving = np.zeros(2, dtype=np.int64)
    _, _, _, prb_need = schedule_network(demand, se, serving, 1, *_one_cell())
    assert prb_need == pytest.approx(demand / (se * 200e3), rel=1e-12)


def test_schedule_cell_wrapper():
    cell = make_cell("c", "s")  # 100 blocks over 20 MHz
    cfg = PropagationConfig()
    res = schedule_cell(cell, [1e6, 2e6, 5e5], [10.0, 10.0, -20.0], cfg)
    per_block = SE_10DB * 200e3
    assert res.achieved_bps == pytest.approx([1e6, 2e6, 0.0])
    assert res.prb == pytest.approx([1e6 / per_block, 2e6 / per_block, 0.0])
    assert list(res.outage) == [False, False, True]
    assert res.load == pytest.approx(3e6 / per_block / 100.0)


# -- association ------------------------------------------------------------

def test_associate_picks_strongest_eligible():
    row = np.array([-80.0, -62.0, -70.0])
    assert associate(row, np.array([True, True, True])) == 1
    assert associate(row, np.array([True, False, True])) == 2


def test_associate_tie_goes_to_lowest_index():
    row = np.array([-70.0, -70.0, -80.0])
    assert associate(row, np.array([True, True, True])) == 0


def test_associate_without_candidates_rejects():
    with pytest.raises(CommandRejected):
        associate(np.array([-70.0]), np.array([False]))


def test_associate_vector_matches_scalar():
    rng = np.random.default_rng(5)
    rsrp = rng.uniform(-110, -60, size=(40, 4))
    eligible = np.array([True, False, True, True])
    got = associate_vector(rsrp, eligible)
    expected = [associate(rsrp[u], eligible) for u in range(40)]
    assert got.tolist() == expected


# -- power model ------------------------------------------------------------

def test_cell_power_affine_when_transmitting():
    params = PowerParams(p0_w=500.0, delta_p=4.0, p_sleep_w=50.0,
                         p_tx_max_w=tx_dbm_to_watts(46.0))
    expected = 500.0 + 4.0 * 0.5 * 39.810717055349734
    assert cell_power_w(ACTIVE, 0.5, params) == pytest.approx(expected, rel=1e-12)
    # a draining cell still transmits and still burns the active profile
    assert cell_power_w(PENDING_OFF, 0.5, params) == pytest.approx(expected, rel=1e-12)
    assert cell_power_w(ACTIVE, 0.0, params) == 500.0


def test_cell_power_sleep_ignores_load():
    params = PowerParams(p0_w=500.0, delta_p=4.0, p_sleep_w=50.0,
                         p_tx_max_w=tx_dbm_to_watts(46.0))
    assert cell_power_w(OFF, 0.9, params) == 50.0


# -- control execution ------------------------------------------------------

class FakePop:
    """Just enough of the population surface for drain bookkeeping: one row
    per user, ``serving`` holds the cell index."""

    def __init__(self, serving):
        self.serving = np.asarray(serving, dtype=np.int64)

    def count_in_cell(self, i):
        return int((self.serving == i).sum())

    def rows_in_cell(self, i):
        return np.flatnonzero(self.serving == i)

    def reassign(self, rows, j):
        self.serving[rows] = j

    def row_of(self, ue_id):
        return int(ue_id)


def make_emulator(*, radius_m=600.0, t_block_s=600.0, cleanup_timeout_s=30.0,
                  serving=None):
    """Two sites 1000 m apart; 600 m adjacency keeps them out of each
    other's neighbor sets. Sorted ids: c0-cap, c0-cov, c1-cap."""
    s0 = Site(id="s0", x_m=500.0, y_m=500.0, environment=UMA)
    s1 = Site(id="s1", x_m=1500.0, y_m=500.0, environment=UMA)
    cells = [
        make_cell("c0-cap", "s0", layer=CAPACITY),
        make_cell("c0-cov", "s0", carrier_hz=0.773e9, bandwidth_hz=10e6,
                  n_prb=50, layer=COVERAGE),
        make_cell("c1-cap", "s1", layer=CAPACITY),
    ]
    sc = make_scenario([s0, s1], cells)
    bus = RicBus()
    acks = []
    bus.subscribe(ricbus.E2, ricbus.CONTROL_ACK, acks.append, name="probe")
    ran = RanEmulator(sc, build_neighbor_map(sc, radius_m), bus,
                      t_block_s=t_block_s, cleanup_timeout_s=cleanup_timeout_s)
    if serving is not None:
        ran.attach_population(FakePop(serving))
    return ran, bus, acks


def test_off_with_users_enters_drain():
    ran, _, acks = make_emulator(serving=[0, 0])
    ran.apply_cell_command("cell_off", "c0-cap", 100.0)
    st = ran.states[0]
    assert st.status == PENDING_OFF
    assert st.pending_since_s == 100.0
    assert [a.payload["event"] for a in acks] == ["cleanup_requested"]
    assert acks[0].destination == "ts_xapp"
    assert [e.new for e in ran.events] == [PENDING_OFF]
    assert ran.events[0].cause == CAUSE_XAPP


def test_block_covers_cell_and_neighbors_only():
    ran, _, _ = make_emulator(serving=[0, 0])
    ran.apply_cell_command("cell_off", "c0-cap", 100.0)
    assert ran.states[0].blocked_until_s == 700.0
    assert ran.states[1].blocked_until_s == 700.0  # co-sited neighbor
    assert ran.states[2].blocked_until_s == float("-inf")


def test_drained_cell_completes_off():
    ran, _, acks = make_emulator(serving=[0, 0])
    ran.apply_cell_command("cell_off", "c0-cap", 100.0)
    ran.pop.serving[:] = 2
    ran.resolve_pending(105.0)
    st = ran.states[0]
    assert st.status == OFF
    assert st.pending_since_s is None
    assert st.load == 0.0
    dones = [a for a in acks if a.payload["event"] == "off_done"]
    assert sorted(a.destination for a in dones) == ["coos_xapp", "ts_xapp"]
    assert [e.new for e in ran.events] == [PENDING_OFF, OFF]
    assert ran.events[-1].cause == CAUSE_XAPP


def test_empty_cell_switches_off_immediately():
    ran, _, acks = make_emulator(serving=[2])
    ran.apply_cell_command("cell_off", "c0-cap", 100.0)
    assert ran.states[0].status == OFF
    assert [a.payload["event"] for a in acks] == \
        ["cleanup_requested", "off_done", "off_done"]


def test_off_without_population_is_immediate():
    ran, _, _ = make_emulator()
    ran.apply_cell_command("cell_off", "c0-cap", 0.0)
    assert ran.states[0].status == OFF


def test_cell_on_round_trip():
    ran, _, acks = make_emulator(serving=[2])
    ran.manual_switch_off(["c0-cap"])
    ran.apply_cell_command("cell_on", "c0-cap", 50.0)
    assert ran.states[0].status == ACTIVE
    assert ran.states[0].blocked_until_s == 650.0
    assert [a.payload["event"] for a in acks] == ["on_done", "on_done"]
    assert sorted(a.destination for a in acks) == ["coos_xapp", "ts_xapp"]


def test_cell_on_requires_off_state():
    ran, _, _ = make_emulator(serving=[2])
    with pytest.raises(CommandRejected):
        ran.apply_cell_command("cell_on", "c0-cap", 0.0)


def test_commands_rejected_while_blocked():
    ran, _, _ = make_emulator(serving=[2])
    ran.apply_cell_command("cell_off", "c0-cap", 0.0)  # empty, off at once
    with pytest.raises(CommandRejected):
        ran.apply_cell_command("cell_on", "c0-cap", 599.0)
    ran.apply_cell_command("cell_on", "c0-cap", 600.0)  # guard window over
    assert ran.states[0].status == ACTIVE


def test_coverage_layer_cannot_switch_off():
    ran, _, acks = make_emulator(serving=[2])
    with pytest.raises(CommandRejected):
        ran.apply_cell_command("cell_off", "c0-cov", 0.0)
    assert ran.events == []
    assert acks == []


def test_second_command_during_drain_rejected():
    ran, _, _ = make_emulator(serving=[0])
    ran.apply_cell_command("cell_off", "c0-cap", 0.0)
    assert ran.states[0].status == PENDING_OFF
    for action in ("cell_off", "cell_on"):
        with pytest.raises(CommandRejected):
            ran.apply_cell_command(action, "c0-cap", 700.0)


def test_forced_drain_after_timeout():
    ran, _, _ = make_emulator(serving=[0, 0, 2])
    ran.apply_cell_command("cell_off", "c0-cap", 0.0)
    ran.resolve_pending(29.0, rsrp_dbm=np.zeros((3, 3)))
    assert ran.states[0].status == PENDING_OFF  # not yet timed out
    rsrp = np.array([[-60.0, -90.0, -70.0]] * 3)
    ran.resolve_pending(30.0, rsrp_dbm=rsrp)
    st = ran.states[0]
    assert st.status == OFF
    # strongest of the still-active cells; the draining cell itself and its
    # -60 column are not eligible
    assert ran.pop.serving.tolist() == [2, 2, 2]
    assert ran.forced_cleanups == 1
    assert ran.forced_handover_ues == 2
    assert ran.events[-1].cause == CAUSE_FORCED


def test_forced_drain_requires_measurements():
    ran, _, _ = make_emulator(serving=[0])
    ran.apply_cell_command("cell_off", "c0-cap", 0.0)
    with pytest.raises(CommandRejected):
        ran.resolve_pending(30.0, rsrp_dbm=None)


def test_handover_over_bus():
    ran, bus, acks = make_emulator(serving=[0, 0])
    bus.publish(Message(ricbus.E2, ricbus.CONTROL_REQ, 5.0, "ts_xapp", "ran",
                        payload={"action": "handover", "ue_id": 1,
                                 "target": "c1-cap"}))
    assert ran.pop.serving.tolist() == [0, 2]
    assert acks[-1].payload == {"event": "handover_done", "ue_id": 1,
                                "cell_id": "c1-cap"}


def test_handover_target_must_be_active():
    ran, bus, _ = make_emulator(serving=[0])
    ran.manual_switch_off(["c1-cap"])
    with pytest.raises(CommandRejected):
        bus.publish(Message(ricbus.E2, ricbus.CONTROL_REQ, 5.0, "ts_xapp",
                            "ran", payload={"action": "handover", "ue_id": 0,
                                            "target": "c1-cap"}))


def test_manual_switch_off_semantics():
    ran, _, acks = make_emulator(serving=[2])
    ran.manual_switch_off(["c0-cap"])
    st = ran.states[0]
    assert st.status == OFF
    assert st.blocked_until_s == float("-inf")  # no guard window
    assert ran.events[-1].cause == CAUSE_MANUAL
    assert acks == []  # no bus traffic either
    with pytest.raises(CommandRejected):
        ran.manual_switch_off(["c0-cov"])


def test_unknown_action_and_cell_rejected():
    ran, bus, _ = make_emulator(serving=[0])
    with pytest.raises(CommandRejected):
        bus.publish(Message(ricbus.E2, ricbus.CONTROL_REQ, 0.0, "x", "ran",
                            payload={"action": "reboot"}))
    with pytest.raises(CommandRejected):
        ran.apply_cell_command("cell_off", "nope", 0.0)


def test_masks_and_counts_track_status():
    ran, _, _ = make_emulator(serving=[2])
    assert ran.n_off() == 0
    assert ran.n_active_capacity() == 2
    ran.apply_cell_command("cell_off", "c0-cap", 0.0)
    assert ran.transmitting_mask().tolist() == [False, True, True]
    assert ran.active_mask().tolist() == [False, True, True]
    assert ran.n_off() == 1
    assert ran.n_active_capacity() == 1
