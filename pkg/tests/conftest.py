"""Shared builders for small hand-specified scenarios."""

from __future__ import annotations

import pytest

from coosim.scenario import (CAPACITY, COVERAGE, N_SLOTS, CellDef, PowerParams,
                             Scenario, Site, TrafficPixel, UMA, tx_dbm_to_watts)


def flat_profile(value: float) -> tuple:
    return (float(value),) * N_SLOTS


def make_pixels(nx: int, ny: int, mean_ues: float, mean_demand_bps: float):
    """Row-major pixel grid with the same flat profile everywhere."""
    return tuple(
        TrafficPixel(ix=ix, iy=iy,
                     mean_active_ues=flat_profile(mean_ues),
                     mean_demand_bps=flat_profile(mean_demand_bps))
        for iy in range(ny) for ix in range(nx)
    )


def make_cell(cell_id: str, site_id: str, *, carrier_hz: float = 2.16e9,
              bandwidth_hz: float = 20e6, n_prb: int = 100,
              tx_power_dbm: float = 46.0, height_m: float = 25.0,
              azimuth_deg: float = 0.0, layer: str = CAPACITY,
              p0_w: float = 500.0, delta_p: float = 4.0,
              p_sleep_w: float = 50.0) -> CellDef:
    return CellDef(
        id=cell_id, site_id=site_id, carrier_hz=carrier_hz,
        bandwidth_hz=bandwidth_hz, n_prb=n_prb, tx_power_dbm=tx_power_dbm,
        height_m=height_m, azimuth_deg=azimuth_deg, tilt_deg=0.0, layer=layer,
        power=PowerParams(p0_w=p0_w, delta_p=delta_p, p_sleep_w=p_sleep_w,
                          p_tx_max_w=tx_dbm_to_watts(tx_power_dbm)),
    )


def make_scenario(sites, cells, *, area=(2000.0, 2000.0), pixel_size_m=500.0,
                  mean_ues=2.0, mean_demand_bps=1e6, seed_shadowing=3):
    import math
    nx = math.ceil(area[0] / pixel_size_m)
    ny = math.ceil(area[1] / pixel_size_m)
    return Scenario(
        area_width_m=float(area[0]), area_height_m=float(area[1]),
        pixel_size_m=float(pixel_size_m), sites=tuple(sites),
        cells=tuple(cells), pixels=make_pixels(nx, ny, mean_ues, mean_demand_bps),
        seed_shadowing=seed_shadowing,
    )


@pytest.fixture
def two_cell_scenario():
    """One site, one coverage + one capacity cell on different carriers."""
    site = Site(id="s0", x_m=1000.0, y_m=1000.0, environment=UMA)
    cov = make_cell("c-cov", "s0", carrier_hz=0.773e9, bandwidth_hz=10e6,
                    n_prb=50, layer=COVERAGE)
    cap = make_cell("c-cap", "s0", carrier_hz=2.16e9, layer=CAPACITY)
    return make_scenario([site], [cov, cap])
