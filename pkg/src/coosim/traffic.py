"""User arrivals, demand draws, and confined random-waypoint mobility.

Each pixel behaves as an independent M/M/inf source: arrivals are Poisson
with rate mean_active_ues / mean_service_s for the current half-hour slot,
and session lifetimes are exponential, so the long-run mean number of
concurrent users per pixel equals the profile value. Demand is drawn once
per user from an exponential with the slot's mean. Users then wander with a
random-waypoint walk confined to a disc around their spawn point, at
pedestrian speed.

The per-pixel API (:func:`spawn_arrivals`, :func:`step_mobility`) takes an
injected generator so callers control streams; the engine uses
:class:`TrafficSource`, which draws from one seeded stream in a fixed pixel
order and is therefore equally deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import SLOT_SECONDS, Scenario, TrafficPixel


@dataclass(frozen=True)
class ArrivalConfig:
    mean_service_s: float = 120.0
    waypoint_radius_m: float = 200.0
    speed_range_mps: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        if self.mean_service_s <= 0:
            raise ValueError("mean_service_s must be positive")
        lo, hi = self.speed_range_mps
        if not (0 <= lo <= hi):
            raise ValueError("speed_range_mps must satisfy 0 <= lo <= hi")
        if self.waypoint_radius_m < 0:
            raise ValueError("waypoint_radius_m must be non-negative")


@dataclass
class UE:
    """One user session. Mutable runtime record."""

    id: int
    pixel: int                # row-major pixel index at spawn
    pos: np.ndarray           # (2,) metres
    origin: np.ndarray        # spawn point, centre of the waypoint disc
    waypoint: np.ndarray
    speed_mps: float
    demand_bps: float
    departs_at_s: float
    serving_cell: str | None = None


def slot_of(t_s: float) -> int:
    return int(t_s // SLOT_SECONDS) % 48


def _draw_waypoints(origin: np.ndarray, radius_m: float, area_wh: tuple[float, float],
                    rng: np.random.Generator) -> np.ndarray:
    """Uniform draws in the disc around each origin, clipped to the area."""
    n = origin.shape[0]
    r = radius_m * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    wp = origin + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    wp[:, 0] = np.clip(wp[:, 0], 0.0, area_wh[0])
    wp[:, 1] = np.clip(wp[:, 1], 0.0, area_wh[1])
    return wp


def spawn_arrivals(pixel: TrafficPixel, slot: int, dt_s: float,
                   rng: np.random.Generator, cfg: ArrivalConfig,
                   pixel_size_m: float, area_wh: tuple[float, float],
                   t_s: float = 0.0, first_id: int = 0) -> list[UE]:
    """New sessions for one pixel over one step of dt_s seconds.

    The count is Poisson(mean_active_ues[slot] / mean_service_s * dt_s);
    positions are uniform in the pixel square. A zero profile value spawns
    nothing without touching the generator for per-user draws.
    """
    mean_ues = pixel.mean_active_ues[slot]
    lam = mean_ues / cfg.mean_service_s * dt_s
    count = int(rng.poisson(lam)) if lam > 0 else 0
    if count == 0:
        return []
    x0, y0 = pixel.ix * pixel_size_m, pixel.iy * pixel_size_m
    pos = np.stack([x0 + pixel_size_m * rng.random(count),
                    y0 + pixel_size_m * rng.random(count)], axis=1)
    demand = rng.exponential(pixel.mean_demand_bps[slot], size=count)
    life = rng.exponential(cfg.mean_service_s, size=count)
    speed = rng.uniform(*cfg.speed_range_mps, size=count)
    wp = _draw_waypoints(pos, cfg.waypoint_radius_m, area_wh, rng)
    return [
        UE(id=first_id + i, pixel=0, pos=pos[i].copy(), origin=pos[i].copy(),
           waypoint=wp[i], speed_mps=float(speed[i]), demand_bps=float(demand[i]),
           departs_at_s=t_s + float(life[i]))
        for i in range(count)
    ]


def advance_positions(pos: np.ndarray, waypoint: np.ndarray, speed: np.ndarray,
                      origin: np.ndarray, dt_s: float, rng: np.random.Generator,
                      cfg: ArrivalConfig, area_wh: tuple[float, float]) -> None:
    """Vectorized waypoint walk; mutates pos/waypoint/speed in place.

    A user short of its waypoint advances exactly speed*dt along the
    segment; one that reaches it stops there for the remainder of the step
    and draws a fresh waypoint and speed.
    """
    if pos.shape[0] == 0:
        return
    delta = waypoint - pos
    dist = np.hypot(delta[:, 0], delta[:, 1])
    step = speed * dt_s
    arrived = dist <= step
    moving = ~arrived
    if moving.any():
        scale = (step[moving] / dist[moving])[:, None]
        pos[moving] += delta[moving] * scale
    if arrived.any():
        pos[arrived] = waypoint[arrived]
        idx = np.flatnonzero(arrived)
        waypoint[idx] = _draw_waypoints(origin[idx], cfg.waypoint_radius_m, area_wh, rng)
        speed[idx] = rng.uniform(*cfg.speed_range_mps, size=idx.size)


def step_mobility(ue: UE, dt_s: float, rng: np.random.Generator,
                  cfg: ArrivalConfig, area_wh: tuple[float, float]) -> UE:
    """Single-user wrapper over :func:`advance_positions`; mutates and
    returns the same record."""
    pos = ue.pos.reshape(1, 2)
    wp = ue.waypoint.reshape(1, 2)
    speed = np.array([ue.speed_mps])
    advance_positions(pos, wp, speed, ue.origin.reshape(1, 2), dt_s, rng, cfg, area_wh)
    ue.pos = pos[0]
    ue.waypoint = wp[0]
    ue.speed_mps = float(speed[0])
    return ue


class TrafficSource:
    """Bulk arrival generator over all pixels of a scenario.

    One Poisson draw per tick covers the whole pixel vector; per-user
    attributes are then drawn pixel by pixel in ascending row-major index,
    which keeps runs deterministic for a fixed seed.
    """

    def __init__(self, sc: Scenario, cfg: ArrivalConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.area_wh = (sc.area_width_m, sc.area_height_m)
        self.pixel_size_m = sc.pixel_size_m
        nx = sc.nx
        order = sorted(sc.pixels, key=lambda p: p.iy * nx + p.ix)
        self.mean_ues = np.array([p.mean_active_ues for p in order])     # (npix, 48)
        self.mean_demand = np.array([p.mean_demand_bps for p in order])
        self.rates = self.mean_ues / cfg.mean_service_s                  # arrivals/s
        self.px0 = np.array([p.ix * sc.pixel_size_m for p in order])
        self.py0 = np.array([p.iy * sc.pixel_size_m for p in order])
        self._next_id = 0

    def spawn(self, t_s: float, dt_s: float) -> dict:
        """Arrays of new-user attributes for this tick."""
        slot = slot_of(t_s)
        counts = self.rng.poisson(self.rates[:, slot] * dt_s)
        total = int(counts.sum())
        out = {
            "id": np.empty(total, dtype=np.int64),
            "pixel": np.empty(total, dtype=np.int64),
            "pos": np.empty((total, 2)),
            "origin": np.empty((total, 2)),
            "waypoint": np.empty((total, 2)),
            "speed": np.empty(total),
            "demand": np.empty(total),
            "departs_at": np.empty(total),
        }
        if total == 0:
            return out
        row = 0
        for pix in np.flatnonzero(counts):
            k = int(counts[pix])
            sl = slice(row, row + k)
            pos = np.stack([self.px0[pix] + self.pixel_size_m * self.rng.random(k),
                            self.py0[pix] + self.pixel_size_m * self.rng.random(k)], axis=1)
            out["pos"][sl] = pos
            out["origin"][sl] = pos
            out["demand"][sl] = self.rng.exponential(self.mean_demand[pix, slot], size=k)
            out["departs_at"][sl] = t_s + self.rng.exponential(self.cfg.mean_service_s, size=k)
            out["speed"][sl] = self.rng.uniform(*self.cfg.speed_range_mps, size=k)
            out["waypoint"][sl] = _draw_waypoints(pos, self.cfg.waypoint_radius_m,
                                                  self.area_wh, self.rng)
            out["pixel"][sl] = pix
            row += k
        out["id"][:] = np.arange(self._next_id, self._next_id + total)
        self._next_id += total
        return out
