"""Static network scenario: sites, cells, traffic pixels, neighbor relations.

A scenario describes everything that does not change during a run: the
base-station sites, the cells they host (an always-on low-band coverage
layer plus switchable capacity layers), and a grid of traffic pixels, each
carrying a 48-slot half-hour profile of mean concurrent users and mean
per-user demand. Scenarios are read from and written to a JSON format
documented in ``docs/scenario-schema.md``, or produced deterministically by
:func:`generate_synthetic`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1"
N_SLOTS = 48
SLOT_SECONDS = 1800

# site environments
UMA = "urban_macro"
UMI = "urban_micro"

# cell layers
COVERAGE = "coverage"
CAPACITY = "capacity"

DEFAULT_NEIGHBOR_RADIUS_M = 1500.0


class ScenarioError(ValueError):
    """Scenario could not be parsed or failed validation.

    ``problems`` lists every violated constraint with a field path, so a
    broken file can be fixed in one pass.
    """

    def __init__(self, problems):
        self.problems = [str(p) for p in problems]
        msg = "invalid scenario:\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(msg)


@dataclass(frozen=True)
class PowerParams:
    """Affine cell power model: p0 + delta_p * load * p_tx_max while
    transmitting, p_sleep when switched off. p_tx_max_w is derived from the
    cell's configured transmit power and is not serialized."""

    p0_w: float
    delta_p: float
    p_sleep_w: float
    p_tx_max_w: float


@dataclass(frozen=True)
class Site:
    id: str
    x_m: float
    y_m: float
    environment: str  # UMA or UMI


@dataclass(frozen=True)
class CellDef:
    id: str
    site_id: str
    carrier_hz: float
    bandwidth_hz: float
    n_prb: int
    tx_power_dbm: float
    height_m: float
    azimuth_deg: float
    tilt_deg: float
    layer: str  # COVERAGE or CAPACITY
    power: PowerParams


@dataclass(frozen=True)
class TrafficPixel:
    """One grid square with its 48 half-hour profile slots."""

    ix: int
    iy: int
    mean_active_ues: tuple[float, ...]
    mean_demand_bps: tuple[float, ...]


@dataclass(frozen=True)
class Scenario:
    area_width_m: float
    area_height_m: float
    pixel_size_m: float
    sites: tuple[Site, ...]
    cells: tuple[CellDef, ...]
    pixels: tuple[TrafficPixel, ...]
    seed_shadowing: int = 0

    @property
    def nx(self) -> int:
        return int(math.ceil(self.area_width_m / self.pixel_size_m))

    @property
    def ny(self) -> int:
        return int(math.ceil(self.area_height_m / self.pixel_size_m))

    def site_by_id(self, site_id: str) -> Site:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)

    def sorted_cells(self) -> tuple[CellDef, ...]:
        """Cells in ascending id order; engine-facing code relies on this
        ordering for deterministic tie-breaks."""
        return tuple(sorted(self.cells, key=lambda c: c.id))

    def coverage_cell_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.sorted_cells() if c.layer == COVERAGE)

    def capacity_cell_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.sorted_cells() if c.layer == CAPACITY)

    def check(self) -> None:
        problems = validate(self)
        if problems:
            raise ScenarioError(problems)


def validate(sc: Scenario) -> list[str]:
    """Collect every constraint violation instead of stopping at the first."""
    problems: list[str] = []
    if sc.area_width_m <= 0 or sc.area_height_m <= 0:
        problems.append("area: width_m and height_m must be positive")
    if sc.pixel_size_m <= 0:
        problems.append("area.pixel_size_m: must be positive")

    site_ids = [s.id for s in sc.sites]
    if len(site_ids) != len(set(site_ids)):
        problems.append("sites: duplicate site ids")
    if not sc.sites:
        problems.append("sites: at least one site required")
    for s in sc.sites:
        if s.environment not in (UMA, UMI):
            problems.append(f"sites[{s.id}].environment: unknown value {s.environment!r}")
        if not (0 <= s.x_m <= sc.area_width_m and 0 <= s.y_m <= sc.area_height_m):
            problems.append(f"sites[{s.id}]: position outside the area")

    cell_ids = [c.id for c in sc.cells]
    if len(cell_ids) != len(set(cell_ids)):
        problems.append("cells: duplicate cell ids")
    known_sites = set(site_ids)
    n_coverage = 0
    for c in sc.cells:
        if c.site_id not in known_sites:
            problems.append(f"cells[{c.id}].site_id: unknown site {c.site_id!r}")
        if c.layer not in (COVERAGE, CAPACITY):
            problems.append(f"cells[{c.id}].layer: unknown value {c.layer!r}")
        if c.layer == COVERAGE:
            n_coverage += 1
        if c.n_prb <= 0:
            problems.append(f"cells[{c.id}].n_prb: must be positive")
        if c.bandwidth_hz <= 0:
            problems.append(f"cells[{c.id}].bandwidth_hz: must be positive")
        if c.carrier_hz <= 0:
            problems.append(f"cells[{c.id}].carrier_hz: must be positive")
        if c.height_m <= 0:
            problems.append(f"cells[{c.id}].height_m: must be positive")
        if c.power.p0_w < 0 or c.power.p_sleep_w < 0 or c.power.delta_p < 0:
            problems.append(f"cells[{c.id}].power: parameters must be non-negative")
    if sc.cells and n_coverage == 0:
        problems.append("cells: at least one coverage-layer cell required")

    # pixels must tile the grid exactly, row-major, each with 48 slots
    nx, ny = sc.nx, sc.ny
    if len(sc.pixels) != nx * ny:
        problems.append(f"pixels: expected {nx * ny} entries for a {nx}x{ny} grid, got {len(sc.pixels)}")
    seen = set()
    for p in sc.pixels:
        key = (p.ix, p.iy)
        if key in seen:
            problems.append(f"pixels[{p.ix},{p.iy}]: duplicate grid index")
        seen.add(key)
        if not (0 <= p.ix < nx and 0 <= p.iy < ny):
            problems.append(f"pixels[{p.ix},{p.iy}]: index outside the {nx}x{ny} grid")
        if len(p.mean_active_ues) != N_SLOTS:
            problems.append(f"pixels[{p.ix},{p.iy}].mean_active_ues: expected {N_SLOTS} slots")
        elif any(v < 0 for v in p.mean_active_ues):
            problems.append(f"pixels[{p.ix},{p.iy}].mean_active_ues: negative value")
        if len(p.mean_demand_bps) != N_SLOTS:
            problems.append(f"pixels[{p.ix},{p.iy}].mean_demand_bps: expected {N_SLOTS} slots")
        elif any(v <= 0 for v in p.mean_demand_bps):
            problems.append(f"pixels[{p.ix},{p.iy}].mean_demand_bps: non-positive value")
    return problems


# ---------------------------------------------------------------------------
# JSON serialization

def _power_to_dict(p: PowerParams) -> dict:
    return {"p0_w": p.p0_w, "delta_p": p.delta_p, "p_sleep_w": p.p_sleep_w}


def to_dict(sc: Scenario) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "area": {
            "width_m": sc.area_width_m,
            "height_m": sc.area_height_m,
            "pixel_size_m": sc.pixel_size_m,
        },
        "seed_shadowing": sc.seed_shadowing,
        "sites": [
            {"id": s.id, "x_m": s.x_m, "y_m": s.y_m, "environment": s.environment}
            for s in sc.sites
        ],
        "cells": [
            {
                "id": c.id,
                "site_id": c.site_id,
                "carrier_hz": c.carrier_hz,
                "bandwidth_hz": c.bandwidth_hz,
                "n_prb": c.n_prb,
                "tx_power_dbm": c.tx_power_dbm,
                "height_m": c.height_m,
                "azimuth_deg": c.azimuth_deg,
                "tilt_deg": c.tilt_deg,
                "layer": c.layer,
                "power": _power_to_dict(c.power),
            }
            for c in sc.cells
        ],
        "pixels": [
            {
                "ix": p.ix,
                "iy": p.iy,
                "mean_active_ues": list(p.mean_active_ues),
                "mean_demand_bps": list(p.mean_demand_bps),
            }
            for p in sc.pixels
        ],
    }


def tx_dbm_to_watts(tx_power_dbm: float) -> float:
    return 10.0 ** ((tx_power_dbm - 30.0) / 10.0)


def from_dict(doc: dict) -> Scenario:
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioError(["top level: expected a JSON object"])
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        problems.append(f"version: expected {SCHEMA_VERSION!r}, got {version!r}")

    def need(container: dict, key: str, where: str, default=None):
        if key not in container:
            problems.append(f"{where}.{key}: missing")
            return default
        return container[key]

    area = doc.get("area")
    if not isinstance(area, dict):
        problems.append("area: missing or not an object")
        area = {}
    width = need(area, "width_m", "area", 0.0)
    height = need(area, "height_m", "area", 0.0)
    pixel = need(area, "pixel_size_m", "area", 100.0)

    sites = []
    for i, s in enumerate(doc.get("sites", [])):
        sites.append(
            Site(
                id=str(need(s, "id", f"sites[{i}]", f"?{i}")),
                x_m=float(need(s, "x_m", f"sites[{i}]", 0.0)),
                y_m=float(need(s, "y_m", f"sites[{i}]", 0.0)),
                environment=str(need(s, "environment", f"sites[{i}]", UMA)),
            )
        )

    cells = []
    for i, c in enumerate(doc.get("cells", [])):
        where = f"cells[{i}]"
        tx_dbm = float(need(c, "tx_power_dbm", where, 0.0))
        praw = c.get("power")
        if not isinstance(praw, dict):
            problems.append(f"{where}.power: missing or not an object")
            praw = {}
        power = PowerParams(
            p0_w=float(need(praw, "p0_w", f"{where}.power", 0.0)),
            delta_p=float(need(praw, "delta_p", f"{where}.power", 0.0)),
            p_sleep_w=float(need(praw, "p_sleep_w", f"{where}.power", 0.0)),
            p_tx_max_w=tx_dbm_to_watts(tx_dbm),
        )
        cells.append(
            CellDef(
                id=str(need(c, "id", where, f"?{i}")),
                site_id=str(need(c, "site_id", where, "")),
                carrier_hz=float(need(c, "carrier_hz", where, 0.0)),
                bandwidth_hz=float(need(c, "bandwidth_hz", where, 0.0)),
                n_prb=int(need(c, "n_prb", where, 0)),
                tx_power_dbm=tx_dbm,
                height_m=float(need(c, "height_m", where, 0.0)),
                azimuth_deg=float(need(c, "azimuth_deg", where, 0.0)),
                tilt_deg=float(need(c, "tilt_deg", where, 0.0)),
                layer=str(need(c, "layer", where, "")),
                power=power,
            )
        )

    pixels = []
    for i, p in enumerate(doc.get("pixels", [])):
        where = f"pixels[{i}]"
        pixels.append(
            TrafficPixel(
                ix=int(need(p, "ix", where, -1)),
                iy=int(need(p, "iy", where, -1)),
                mean_active_ues=tuple(float(v) for v in need(p, "mean_active_ues", where, [])),
                mean_demand_bps=tuple(float(v) for v in need(p, "mean_demand_bps", where, [])),
            )
        )

    if problems:
        raise ScenarioError(problems)

    sc = Scenario(
        area_width_m=float(width),
        area_height_m=float(height),
        pixel_size_m=float(pixel),
        sites=tuple(sites),
        cells=tuple(cells),
        pixels=tuple(pixels),
        seed_shadowing=int(doc.get("seed_shadowing", 0)),
    )
    sc.check()
    return sc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as e:
        raise ScenarioError([f"file: cannot read {path}: {e}"]) from e
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ScenarioError([f"file: not valid JSON: {e}"]) from e
    return from_dict(doc)


def save_scenario(sc: Scenario, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_dict(sc), indent=None, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# Neighbor relations

@dataclass(frozen=True)
class NeighborMap:
    """Symmetric cell adjacency derived from site distance. Co-sited cells
    are always neighbors (site distance zero)."""

    radius_m: float
    neighbors: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def of(self, cell_id: str) -> tuple[str, ...]:
        return self.neighbors[cell_id]


def build_neighbor_map(sc: Scenario, radius_m: float = DEFAULT_NEIGHBOR_RADIUS_M) -> NeighborMap:
    cells = sc.sorted_cells()
    sites = {s.id: s for s in sc.sites}
    xy = np.array([[sites[c.site_id].x_m, sites[c.site_id].y_m] for c in cells])
    ids = [c.id for c in cells]
    d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    out: dict[str, tuple[str, ...]] = {}
    for i, cid in enumerate(ids):
        mask = (d[i] <= radius_m)
        mask[i] = False  # no self-loop
        out[cid] = tuple(ids[j] for j in np.flatnonzero(mask))
    return NeighborMap(radius_m=radius_m, neighbors=out)


# ---------------------------------------------------------------------------
# Synthetic generation

@dataclass(frozen=True)
class LayerSpec:
    """One carrier layer to distribute across the sites."""

    carrier_hz: float
    layer: str
    n_cells: int
    bandwidth_hz: float
    n_prb: int
    tx_power_dbm: float
    p0_w: float = 500.0
    delta_p: float = 4.0
    p_sleep_w: float = 50.0
    tilt_deg: float = 0.0


@dataclass(frozen=True)
class GeneratorParams:
    area_width_m: float
    area_height_m: float
    n_sites: int
    layers: tuple[LayerSpec, ...]
    pixel_size_m: float = 100.0
    umi_fraction: float = 0.3
    uma_height_m: float = 25.0
    umi_height_m: float = 10.0
    ue_density_range: tuple[float, float] = (0.01, 0.21)
    demand_range_bps: tuple[float, float] = (0.56e6, 19e6)
    diurnal_amplitude: float = 0.75
    n_hotspots: int = 8
    hotspot_sigma_range_m: tuple[float, float] = (200.0, 600.0)
    # uniform base intensity under the hotspots; raising it flattens the
    # spatial traffic distribution
    hotspot_floor: float = 0.25


def dt_like_params() -> GeneratorParams:
    """Metropolitan-scale preset: 13 sites, 60 cells on three carriers,
    66x81 pixel grid."""
    return GeneratorParams(
        area_width_m=6600.0,
        area_height_m=8100.0,
        n_sites=13,
        layers=(
            LayerSpec(carrier_hz=773e6, layer=COVERAGE, n_cells=15,
                      bandwidth_hz=10e6, n_prb=50, tx_power_dbm=46.0),
            LayerSpec(carrier_hz=2160e6, layer=CAPACITY, n_cells=39,
                      bandwidth_hz=20e6, n_prb=100, tx_power_dbm=46.0),
            LayerSpec(carrier_hz=3655e6, layer=CAPACITY, n_cells=6,
                      bandwidth_hz=40e6, n_prb=200, tx_power_dbm=40.0,
                      p0_w=100.0, p_sleep_w=10.0),
        ),
    )


def desk_params() -> GeneratorParams:
    """Reduced preset (16 cells) sized so a full simulated day runs in well
    under five minutes.

    Every site carries four beams: a low-band blanket cell plus three
    capacity beams. The sector pattern pins each beam's association share
    near its wedge fraction, so the quiet low band keeps only about a
    quarter of the traffic when everything is on, and its reduced transmit
    power trims that further. With everything on, outage stays in single
    digits; with the whole capacity layer off, the four blanket cells are
    oversubscribed even at the nightly trough. That keeps the closed loop
    regulating between the corners instead of saturating at either."""
    return GeneratorParams(
        area_width_m=3300.0,
        area_height_m=3300.0,
        n_sites=4,
        layers=(
            LayerSpec(carrier_hz=773e6, layer=COVERAGE, n_cells=4,
                      bandwidth_hz=20e6, n_prb=200, tx_power_dbm=37.0),
            LayerSpec(carrier_hz=2160e6, layer=CAPACITY, n_cells=8,
                      bandwidth_hz=20e6, n_prb=100, tx_power_dbm=46.0),
            LayerSpec(carrier_hz=3655e6, layer=CAPACITY, n_cells=4,
                      bandwidth_hz=40e6, n_prb=200, tx_power_dbm=46.0,
                      p0_w=300.0, p_sleep_w=30.0),
        ),
        umi_fraction=0.0,
        ue_density_range=(0.025, 0.24),
        demand_range_bps=(0.12e6, 1.0e6),
        diurnal_amplitude=0.25,
        n_hotspots=4,
        hotspot_sigma_range_m=(500.0, 1000.0),
        hotspot_floor=0.5,
    )


def _site_positions(params: GeneratorParams, rng: np.random.Generator) -> np.ndarray:
    """Jittered grid layout covering the area."""
    n = params.n_sites
    w, h = params.area_width_m, params.area_height_m
    ncols = max(1, round(math.sqrt(n * w / h)))
    nrows = int(math.ceil(n / ncols))
    sx, sy = w / ncols, h / nrows
    pos = []
    for k in range(n):
        col, row = k % ncols, k // ncols
        jx, jy = rng.uniform(-0.18, 0.18, size=2)
        x = (col + 0.5 + jx) * sx
        y = (row + 0.5 + jy) * sy
        pos.append((x, y))
    pos = np.array(pos)
    margin = 0.02
    pos[:, 0] = np.clip(pos[:, 0], margin * w, (1 - margin) * w)
    pos[:, 1] = np.clip(pos[:, 1], margin * h, (1 - margin) * h)
    return pos


def generate_synthetic(params: GeneratorParams, seed: int) -> Scenario:
    """Deterministically build a scenario from generation parameters.

    The same (params, seed) pair always produces a byte-identical scenario
    file. Profile values are quantized (1e-4 users, 1 bit/s) so the JSON
    representation stays compact and reproducible.
    """
    problems = []
    if params.n_sites <= 0:
        problems.append("n_sites: must be positive")
    if not params.layers:
        problems.append("layers: at least one layer required")
    if not any(l.layer == COVERAGE and l.n_cells > 0 for l in params.layers):
        problems.append("layers: at least one coverage cell required")
    for i, l in enumerate(params.layers):
        if l.n_cells < 0:
            problems.append(f"layers[{i}].n_cells: must be non-negative")
    lo_u, hi_u = params.ue_density_range
    lo_d, hi_d = params.demand_range_bps
    if not (0 < lo_u < hi_u):
        problems.append("ue_density_range: need 0 < lo < hi")
    if not (0 < lo_d < hi_d):
        problems.append("demand_range_bps: need 0 < lo < hi")
    if not (0.0 <= params.diurnal_amplitude <= 1.0):
        problems.append("diurnal_amplitude: must lie in [0, 1]")
    if problems:
        raise ScenarioError(problems)

    rng = np.random.default_rng(seed)
    pos = _site_positions(params, rng)
    env_draw = rng.random(params.n_sites)
    sites = tuple(
        Site(
            id=f"s{k:02d}",
            x_m=round(float(pos[k, 0]), 1),
            y_m=round(float(pos[k, 1]), 1),
            environment=UMI if env_draw[k] < params.umi_fraction else UMA,
        )
        for k in range(params.n_sites)
    )

    # Layer members go round-robin over sites; azimuths then spread evenly
    # over ALL beams of a site so each wedge has exactly one boresight owner.
    # Sharing azimuths across bands would leave the high bands unused: at
    # equal bearing the low band wins association nearly always.
    site_slots: list[list[tuple[LayerSpec, int]]] = [[] for _ in sites]
    for spec in params.layers:
        counters: dict[int, int] = {}
        for j in range(spec.n_cells):
            k = j % params.n_sites
            i_local = counters.get(k, 0)
            counters[k] = i_local + 1
            site_slots[k].append((spec, i_local))

    cells: list[CellDef] = []
    for k, slots in enumerate(site_slots):
        site = sites[k]
        height = params.uma_height_m if site.environment == UMA else params.umi_height_m
        base_az = (k * 137.5) % 360.0
        for j, (spec, i_local) in enumerate(slots):
            az = (base_az + j * 360.0 / len(slots)) % 360.0
            mhz = int(round(spec.carrier_hz / 1e6))
            cells.append(
                CellDef(
                    id=f"{site.id}-f{mhz}-{chr(ord('a') + i_local)}",
                    site_id=site.id,
                    carrier_hz=spec.carrier_hz,
                    bandwidth_hz=spec.bandwidth_hz,
                    n_prb=spec.n_prb,
                    tx_power_dbm=spec.tx_power_dbm,
                    height_m=height,
                    azimuth_deg=round(az, 1),
                    tilt_deg=spec.tilt_deg,
                    layer=spec.layer,
                    power=PowerParams(
                        p0_w=spec.p0_w,
                        delta_p=spec.delta_p,
                        p_sleep_w=spec.p_sleep_w,
                        p_tx_max_w=tx_dbm_to_watts(spec.tx_power_dbm),
                    ),
                )
            )

    # traffic profiles: spatial intensity from hotspots, diurnal swing shared
    # by all pixels (trough at 04:00, peak at 16:00-ish)
    nx = int(math.ceil(params.area_width_m / params.pixel_size_m))
    ny = int(math.ceil(params.area_height_m / params.pixel_size_m))
    cx = (np.arange(nx) + 0.5) * params.pixel_size_m
    cy = (np.arange(ny) + 0.5) * params.pixel_size_m
    px, py = np.meshgrid(cx, cy)  # (ny, nx)

    hot_xy = rng.uniform([0, 0], [params.area_width_m, params.area_height_m],
                         size=(params.n_hotspots, 2)) if params.n_hotspots else np.zeros((0, 2))
    hot_sigma = rng.uniform(*params.hotspot_sigma_range_m, size=params.n_hotspots)
    intensity = np.full((ny, nx), params.hotspot_floor)
    for (hx, hy), sg in zip(hot_xy, hot_sigma):
        d2 = (px - hx) ** 2 + (py - hy) ** 2
        intensity += np.exp(-d2 / (2 * sg * sg))
    intensity /= intensity.max()

    hours = (np.arange(N_SLOTS) + 0.5) * SLOT_SECONDS / 3600.0
    swing = 0.5 * (1.0 - np.cos(2 * np.pi * (hours - 4.0) / 24.0))
    f_slot = (1.0 - params.diurnal_amplitude) + params.diurnal_amplitude * swing

    demand_mix = 0.5 * intensity + 0.5 * rng.random((ny, nx))

    flat_s = intensity.reshape(-1)          # row-major: index = iy*nx + ix
    flat_d = demand_mix.reshape(-1)
    ues = lo_u + (hi_u - lo_u) * flat_s[:, None] * f_slot[None, :]
    dem = lo_d + (hi_d - lo_d) * flat_d[:, None] * f_slot[None, :]
    ues = np.clip(np.round(ues, 4), lo_u, hi_u)
    dem = np.clip(np.round(dem, 0), lo_d, hi_d)

    pixels = tuple(
        TrafficPixel(
            ix=i % nx,
            iy=i // nx,
            mean_active_ues=tuple(ues[i].tolist()),
            mean_demand_bps=tuple(dem[i].tolist()),
        )
        for i in range(nx * ny)
    )

    sc = Scenario(
        area_width_m=params.area_width_m,
        area_height_m=params.area_height_m,
        pixel_size_m=params.pixel_size_m,
        sites=sites,
        cells=tuple(cells),
        pixels=pixels,
        seed_shadowing=seed,
    )
    sc.check()
    return sc


PRESETS = {"dt-like": dt_like_params, "desk": desk_params}
