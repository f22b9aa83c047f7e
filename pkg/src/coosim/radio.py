"""Link-level radio model.

Covers urban macro / urban micro NLOS path loss with a horizontal sector
antenna pattern, spatially correlated log-normal shadowing held on the
traffic pixel grid, co-channel SINR, and the truncated-Shannon mapping from
SINR to spectral efficiency. Everything is deterministic given the
configuration and seeds, and the hot paths accept numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import UMA, CellDef, Scenario, Site

THERMAL_NOISE_DBM_HZ = -174.0
SPEED_OF_LIGHT = 3.0e8


@dataclass(frozen=True)
class PropagationConfig:
    shadowing_sigma_db: float = 6.0
    shadowing_dcorr_m: float = 50.0
    noise_figure_db: float = 9.0
    sinr_min_db: float = -10.0
    sinr_max_db: float = 22.0
    shannon_alpha: float = 0.6
    se_max_bps_hz: float = 4.4
    ue_height_m: float = 1.5
    min_distance_m: float = 1.0
    # vertical pattern is off by default; the horizontal sector pattern is
    # always applied
    apply_vertical_tilt: bool = False

    def __post_init__(self):
        if self.sinr_min_db >= self.sinr_max_db:
            raise ValueError("sinr_min_db must be below sinr_max_db")
        if not (0 < self.shannon_alpha <= 1):
            raise ValueError("shannon_alpha must lie in (0, 1]")
        if self.se_max_bps_hz <= 0:
            raise ValueError("se_max_bps_hz must be positive")
        if self.shadowing_sigma_db < 0 or self.shadowing_dcorr_m <= 0:
            raise ValueError("shadowing parameters out of range")


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# Path loss (urban macro / urban micro street canyon, NLOS)

def _breakpoint_m(fc_hz, h_bs_m, h_ut_m):
    # effective antenna heights use a 1 m environment height
    return 4.0 * (h_bs_m - 1.0) * (h_ut_m - 1.0) * fc_hz / SPEED_OF_LIGHT


def path_loss_uma_nlos(d2d_m, fc_ghz, h_bs_m, h_ut_m=1.5):
    """Urban-macro NLOS loss in dB; takes the max with the LOS curve."""
    d2d = np.asarray(d2d_m, dtype=float)
    d3d = np.hypot(d2d, h_bs_m - h_ut_m)
    nlos = 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc_ghz) - 0.6 * (h_ut_m - 1.5)
    dbp = _breakpoint_m(fc_ghz * 1e9, h_bs_m, h_ut_m)
    los1 = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
    los2 = (28.0 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
            - 9.0 * np.log10(dbp ** 2 + (h_bs_m - h_ut_m) ** 2))
    los = np.where(d2d <= dbp, los1, los2)
    return np.maximum(los, nlos)


def path_loss_umi_nlos(d2d_m, fc_ghz, h_bs_m, h_ut_m=1.5):
    """Urban-micro street-canyon NLOS loss in dB."""
    d2d = np.asarray(d2d_m, dtype=float)
    d3d = np.hypot(d2d, h_bs_m - h_ut_m)
    nlos = 22.4 + 35.3 * np.log10(d3d) + 21.3 * np.log10(fc_ghz) - 0.3 * (h_ut_m - 1.5)
    dbp = _breakpoint_m(fc_ghz * 1e9, h_bs_m, h_ut_m)
    los1 = 32.4 + 21.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
    los2 = (32.4 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
            - 9.5 * np.log10(dbp ** 2 + (h_bs_m - h_ut_m) ** 2))
    los = np.where(d2d <= dbp, los1, los2)
    return np.maximum(los, nlos)


def sector_attenuation_db(bearing_deg, azimuth_deg):
    """Horizontal sector pattern: -min(12*(theta/65)^2, 30) dB relative to
    boresight, theta wrapped to [-180, 180]."""
    theta = np.mod(np.asarray(bearing_deg, dtype=float) - azimuth_deg + 180.0, 360.0) - 180.0
    return np.minimum(12.0 * (theta / 65.0) ** 2, 30.0)


def vertical_attenuation_db(elev_deg, tilt_deg):
    # 10 deg half-power beamwidth, 30 dB side-lobe floor; tilt positive down
    phi = np.asarray(elev_deg, dtype=float) + tilt_deg
    return np.minimum(12.0 * (phi / 10.0) ** 2, 30.0)


def path_loss(cell: CellDef, site: Site, pos_xy, cfg: PropagationConfig) -> float:
    """Total loss in dB from `cell` to a ground position, including the
    sector antenna attenuation. 2D distance is clamped below at
    cfg.min_distance_m."""
    dx = float(pos_xy[0]) - site.x_m
    dy = float(pos_xy[1]) - site.y_m
    d2d = max(math.hypot(dx, dy), cfg.min_distance_m)
    fc_ghz = cell.carrier_hz / 1e9
    if site.environment == UMA:
        pl = path_loss_uma_nlos(d2d, fc_ghz, cell.height_m, cfg.ue_height_m)
    else:
        pl = path_loss_umi_nlos(d2d, fc_ghz, cell.height_m, cfg.ue_height_m)
    bearing = math.degrees(math.atan2(dy, dx))
    pl = float(pl) + float(sector_attenuation_db(bearing, cell.azimuth_deg))
    if cfg.apply_vertical_tilt:
        elev = math.degrees(math.atan2(cfg.ue_height_m - cell.height_m, d2d))
        pl += float(vertical_attenuation_db(elev, cell.tilt_deg))
    return pl


# ---------------------------------------------------------------------------
# Correlated shadowing

@dataclass
class ShadowField:
    """Per-cell log-normal shadowing sampled on the pixel grid (dB).

    values_db has shape (n_cells, ny, nx) with cells in ascending id order.
    """

    values_db: np.ndarray
    pixel_size_m: float
    cell_ids: tuple[str, ...]

    def lookup(self, cell_index, iy, ix):
        return self.values_db[cell_index, iy, ix]


def _correlated_grid(ny: int, nx: int, spacing_m: float, dcorr_m: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, unit-variance Gaussian field whose autocorrelation is
    exp(-d / dcorr). Spectral synthesis on a doubled torus removes wrap-around
    bias; the filter is the square root of the FFT of the target covariance,
    which makes the generated covariance match the target exactly (up to
    clipping of tiny negative spectral values)."""
    my, mx = 2 * ny, 2 * nx
    ky = np.minimum(np.arange(my), my - np.arange(my))
    kx = np.minimum(np.arange(mx), mx - np.arange(mx))
    dist = np.hypot(ky[:, None], kx[None, :]) * spacing_m
    cov = np.exp(-dist / dcorr_m)
    spec = np.fft.fft2(cov).real
    spec = np.maximum(spec, 0.0)
    noise = rng.standard_normal((my, mx))
    field = np.fft.ifft2(np.sqrt(spec) * np.fft.fft2(noise)).real
    return field[:ny, :nx]


def generate_shadow_field(sc: Scenario, cfg: PropagationConfig, seed: int) -> ShadowField:
    """One independent correlated field per cell, deterministic in (seed,
    cell order)."""
    cells = sc.sorted_cells()
    ny, nx = sc.ny, sc.nx
    out = np.zeros((len(cells), ny, nx))
    if cfg.shadowing_sigma_db > 0:
        for i in range(len(cells)):
            rng = np.random.default_rng([seed, i])
            out[i] = cfg.shadowing_sigma_db * _correlated_grid(
                ny, nx, sc.pixel_size_m, cfg.shadowing_dcorr_m, rng)
    return ShadowField(values_db=out, pixel_size_m=sc.pixel_size_m,
                       cell_ids=tuple(c.id for c in cells))


# ---------------------------------------------------------------------------
# Spectral efficiency

def spectral_efficiency(sinr_db, cfg: PropagationConfig):
    """Truncated Shannon mapping: zero below the SINR floor, otherwise
    alpha*log2(1+sinr) capped at se_max."""
    sinr_db = np.asarray(sinr_db, dtype=float)
    se = np.minimum(cfg.se_max_bps_hz,
                    cfg.shannon_alpha * np.log2(1.0 + db_to_linear(sinr_db)))
    se = np.where(sinr_db < cfg.sinr_min_db, 0.0, se)
    if se.ndim == 0:
        return float(se)
    return se


# ---------------------------------------------------------------------------
# Whole-network link model

@dataclass(frozen=True)
class LinkResult:
    rsrp_dbm: float          # per resource block
    sinr_db: float
    se_bps_hz: float


class LinkModel:
    """Vectorized gains/SINR for all cells at arbitrary ground positions.

    Cells are held in ascending id order; every array axis over cells uses
    that order. Shadowing is read from the pixel grid under each position.
    """

    def __init__(self, sc: Scenario, cfg: PropagationConfig, shadow: ShadowField):
        self.cfg = cfg
        self.scenario = sc
        self.cells = sc.sorted_cells()
        self.cell_ids = tuple(c.id for c in self.cells)
        if shadow.cell_ids != self.cell_ids:
            raise ValueError("shadow field does not match scenario cells")
        self.shadow = shadow
        self.index_of = {cid: i for i, cid in enumerate(self.cell_ids)}

        sites = {s.id: s for s in sc.sites}
        self.site_x = np.array([sites[c.site_id].x_m for c in self.cells])
        self.site_y = np.array([sites[c.site_id].y_m for c in self.cells])
        self.is_uma = np.array([sites[c.site_id].environment == UMA for c in self.cells])
        self.h_bs = np.array([c.height_m for c in self.cells])
        self.fc_ghz = np.array([c.carrier_hz / 1e9 for c in self.cells])
        self.azimuth = np.array([c.azimuth_deg for c in self.cells])
        self.tilt = np.array([c.tilt_deg for c in self.cells])
        self.tx_dbm = np.array([c.tx_power_dbm for c in self.cells])
        self.n_prb = np.array([c.n_prb for c in self.cells])
        self.bandwidth_hz = np.array([c.bandwidth_hz for c in self.cells])
        self.prb_bw_hz = self.bandwidth_hz / self.n_prb
        self.carrier_hz = np.array([c.carrier_hz for c in self.cells])
        # group cells sharing a carrier for interference sums
        self.carrier_groups = [np.flatnonzero(self.carrier_hz == f)
                               for f in np.unique(self.carrier_hz)]
        self.noise_mw = db_to_linear(
            THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(self.bandwidth_hz)
            + cfg.noise_figure_db)
        self.prb_offset_db = 10.0 * np.log10(self.n_prb)
        self.nx, self.ny = sc.nx, sc.ny
        self.pixel_size_m = sc.pixel_size_m

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def pixel_index(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ix = np.clip((xy[:, 0] / self.pixel_size_m).astype(int), 0, self.nx - 1)
        iy = np.clip((xy[:, 1] / self.pixel_size_m).astype(int), 0, self.ny - 1)
        return iy, ix

    def received_dbm(self, xy: np.ndarray) -> np.ndarray:
        """Wideband received power (dBm), shape (n_ue, n_cells)."""
        xy = np.atleast_2d(xy)
        dx = xy[:, 0, None] - self.site_x[None, :]
        dy = xy[:, 1, None] - self.site_y[None, :]
        d2d = np.maximum(np.hypot(dx, dy), self.cfg.min_distance_m)
        pl = np.empty_like(d2d)
        uma = self.is_uma
        if uma.any():
            pl[:, uma] = path_loss_uma_nlos(
                d2d[:, uma], self.fc_ghz[uma], self.h_bs[uma], self.cfg.ue_height_m)
        if (~uma).any():
            pl[:, ~uma] = path_loss_umi_nlos(
                d2d[:, ~uma], self.fc_ghz[~uma], self.h_bs[~uma], self.cfg.ue_height_m)
        bearing = np.degrees(np.arctan2(dy, dx))
        pl += sector_attenuation_db(bearing, self.azimuth[None, :])
        if self.cfg.apply_vertical_tilt:
            elev = np.degrees(np.arctan2(self.cfg.ue_height_m - self.h_bs[None, :], d2d))
            pl += vertical_attenuation_db(elev, self.tilt[None, :])
        iy, ix = self.pixel_index(xy)
        shadow = self.shadow.values_db[:, iy, ix].T  # (n_ue, n_cells)
        return self.tx_dbm[None, :] - pl + shadow

    def rsrp_dbm(self, xy: np.ndarray) -> np.ndarray:
        """Per-resource-block reference power: wideband minus 10*log10(n_prb)."""
        return self.received_dbm(xy) - self.prb_offset_db[None, :]

    def sinr_db_vector(self, p_mw: np.ndarray, serving_idx: np.ndarray,
                       transmitting: np.ndarray) -> np.ndarray:
        """SINR for each row's serving cell given wideband powers (mW).

        transmitting marks cells currently radiating (active or draining);
        switched-off cells contribute nothing. Interference is summed over
        co-channel cells only.
        """
        n = p_mw.shape[0]
        interf = np.zeros(n)
        tx_p = p_mw * transmitting[None, :]
        for group in self.carrier_groups:
            total = tx_p[:, group].sum(axis=1)
            in_group = np.isin(serving_idx, group)
            interf[in_group] = total[in_group]
        own = p_mw[np.arange(n), serving_idx]
        interf = interf - own * transmitting[serving_idx]
        interf = np.maximum(interf, 0.0)
        noise = self.noise_mw[serving_idx]
        return linear_to_db(own / (noise + interf))

    def sinr_db(self, pos_xy, serving_cell: str, transmitting_cells) -> float:
        """Single-position SINR; serving cell must be transmitting."""
        tx_set = set(transmitting_cells)
        if serving_cell not in tx_set:
            raise ValueError(f"serving cell {serving_cell!r} is not transmitting")
        p_mw = db_to_linear(self.received_dbm(np.array([pos_xy], dtype=float)))
        serving = np.array([self.index_of[serving_cell]])
        mask = np.array([cid in tx_set for cid in self.cell_ids])
        return float(self.sinr_db_vector(p_mw, serving, mask)[0])

    def link(self, pos_xy, serving_cell: str, transmitting_cells) -> LinkResult:
        i = self.index_of[serving_cell]
        rsrp = float(self.rsrp_dbm(np.array([pos_xy], dtype=float))[0, i])
        sinr = self.sinr_db(pos_xy, serving_cell, transmitting_cells)
        return LinkResult(rsrp_dbm=rsrp, sinr_db=sinr,
                          se_bps_hz=spectral_efficiency(sinr, self.cfg))
