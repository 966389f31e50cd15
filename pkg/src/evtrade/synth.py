"""Seeded synthetic world and journey generator.

Produces stations with hourly popularity curves, an EV fleet over nine
models, journeys with per-waypoint energy accounting, journey-level
provider/consumer roles with trade quantities, and the decision events
(one per waypoint) with their candidate charging nodes attached.

Every random draw comes from a stream keyed by ``(seed, purpose, index)``,
so results do not depend on processing order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .geo import GeoPoint, haversine_km, haversine_many, search_radii

PROVIDER = "P"
CONSUMER = "C"

DECISION_INTERVAL_MINUTES = 30
RECHARGE_THRESHOLD = 0.20
GRID_COLS = 7
GRID_ROWS = 11

# stream purposes for SeedSequence keys
_STREAM_WORLD = 0
_STREAM_EV = 1
_STREAM_JOURNEY = 2
_STREAM_ROLE = 3


@dataclass(frozen=True)
class EvModel:
    model_id: int
    battery_capacity_wh: float
    range_km: float

    def __post_init__(self):
        if not 1 <= self.model_id <= 9:
            raise ValueError(f"model_id must be in 1..9, got {self.model_id}")
        if self.battery_capacity_wh <= 0 or self.range_km <= 0:
            raise ValueError("capacity and range must be positive")

    @property
    def consumption_wh_per_km(self) -> float:
        return self.battery_capacity_wh / self.range_km


# Nine representative models (capacity Wh, range km); artifact constants.
DEFAULT_EV_MODELS = (
    EvModel(1, 57_500, 438),
    EvModel(2, 75_000, 533),
    EvModel(3, 65_000, 417),
    EvModel(4, 40_000, 240),
    EvModel(5, 77_400, 488),
    EvModel(6, 77_400, 499),
    EvModel(7, 88_000, 500),
    EvModel(8, 77_000, 443),
    EvModel(9, 60_480, 420),
)


@dataclass
class WorldConfig:
    n_stations: int = 200
    n_evs: int = 300
    lat_min: float = 41.66
    lat_max: float = 42.02
    lon_min: float = -87.90
    lon_max: float = -87.55
    n_hubs: int = 5
    hub_sigma_km: float = 0.6
    hub_station_fraction: float = 0.9
    hub_trip_fraction: float = 0.95
    local_trip_fraction: float = 0.6
    charging_speeds_kw: tuple = (7.2, 11.0, 22.0, 50.0, 150.0)
    charging_speed_probs: tuple = (0.25, 0.2, 0.25, 0.2, 0.1)
    ev_models: tuple = DEFAULT_EV_MODELS
    start_date: str = "2023-01-01"
    n_days: int = 365
    trip_km_min: float = 1.5
    trip_km_max: float = 25.0
    min_displacement_km: float = 0.1

    def validate(self) -> None:
        if self.n_stations <= 0 or self.n_evs <= 0:
            raise ValueError("station and EV counts must be positive")
        if self.n_hubs < 0 or self.n_days <= 0:
            raise ValueError("n_hubs must be >= 0 and n_days > 0")
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("degenerate bounding box")
        if len(self.ev_models) == 0:
            raise ValueError("need at least one EV model")
        if len(self.charging_speeds_kw) != len(self.charging_speed_probs):
            raise ValueError("charging speed levels and probabilities differ in length")


@dataclass
class Station:
    station_id: str
    location: GeoPoint
    charging_speed_kw: float
    ports: int
    popularity_profile: np.ndarray  # 24 hourly values in [0, 1]


@dataclass(frozen=True)
class Ev:
    ev_id: str
    model: EvModel


@dataclass
class World:
    config: WorldConfig
    stations: list
    fleet: list
    hubs: np.ndarray  # (n_hubs, 2) lat/lon

    def __iter__(self):
        # allows ``stations, fleet = generate_world(...)``
        return iter((self.stations, self.fleet))


@dataclass
class RoleConfig:
    soc_th_pct: float = 30.0
    soc_target_pct: float = 100.0
    soc_min_pct: float = 20.0  # kept for completeness; the deficit uses soc_target_pct only
    e_min_trade_wh: float = 10_000.0
    p_mid: float = 0.50
    p_high: float = 0.80
    consumer_cutoff: float = 0.30
    high_band_start: float = 0.70
    provider_cutoff: float = 0.90

    def validate(self) -> None:
        if not 0 < self.consumer_cutoff < self.provider_cutoff <= 1:
            raise ValueError("need 0 < consumer_cutoff < provider_cutoff <= 1")
        for p in (self.p_mid, self.p_high):
            if not 0 <= p <= 1:
                raise ValueError("probabilities must lie in [0, 1]")


@dataclass
class GeoConfig:
    min_count: int = 3
    r_start_km: float = 1.0
    r_step_km: float = 1.0
    r_max_km: float = 10.0


@dataclass
class Journey:
    journey_index: int
    journey_id: str
    ev_id: str
    model: EvModel
    origin: GeoPoint
    destination: GeoPoint
    timestamps: list
    waypoints: list
    segment_km: np.ndarray
    segment_consumption_wh: np.ndarray
    recharge_wh: np.ndarray  # energy added by a synthetic recharge after each segment
    energy_level_wh: np.ndarray
    role: str | None = None
    quantity_wh: float | None = None
    surplus_ratio: float | None = None

    @property
    def cumulative_consumption_wh(self) -> float:
        return float(np.sum(self.segment_consumption_wh))

    @property
    def traveled_km(self) -> float:
        return float(np.sum(self.segment_km))


@dataclass
class Candidate:
    station_id: str
    distance_km: float
    charging_speed_kw: float
    popularity: float


@dataclass
class DecisionEvent:
    event_id: str
    ev_id: str
    journey_id: str
    timestamp: datetime
    location: GeoPoint
    community_area: int
    role: str
    soc_e: float
    energy_level_wh: float
    battery_capacity_wh: float
    quantity_wh: float
    model_id: int
    candidates: list = field(default_factory=list)
    decision_interval_minutes: int = DECISION_INTERVAL_MINUTES

    @property
    def spatial_area_id(self) -> int:
        return self.community_area

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)

    @property
    def labelable(self) -> bool:
        return len(self.candidates) > 0


def _stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, purpose, index]))


def _km_to_deg(lat: float, dy_km: float, dx_km: float) -> tuple[float, float]:
    dlat = dy_km / 111.195
    dlon = dx_km / (111.195 * math.cos(math.radians(lat)))
    return dlat, dlon


def _clip_to_box(cfg: WorldConfig, lat: float, lon: float) -> tuple[float, float]:
    return (min(max(lat, cfg.lat_min), cfg.lat_max), min(max(lon, cfg.lon_min), cfg.lon_max))


def _sample_point(cfg: WorldConfig, hubs: np.ndarray, rng: np.random.Generator, hub_fraction: float, hub=None):
    if len(hubs) and rng.random() < hub_fraction:
        h = hubs[rng.integers(len(hubs)) if hub is None else hub]
        dy, dx = rng.normal(0.0, cfg.hub_sigma_km, size=2)
        dlat, dlon = _km_to_deg(h[0], dy, dx)
        return _clip_to_box(cfg, h[0] + dlat, h[1] + dlon)
    return (rng.uniform(cfg.lat_min, cfg.lat_max), rng.uniform(cfg.lon_min, cfg.lon_max))


def popularity_profile(rng: np.random.Generator) -> np.ndarray:
    """Bimodal daily curve with morning/evening peaks, min-max scaled to [0, 1]."""
    hours = np.arange(24) + 0.5
    am = rng.uniform(0.6, 1.0) * np.exp(-0.5 * ((hours - 8.5) / rng.uniform(1.2, 2.2)) ** 2)
    pm = rng.uniform(0.6, 1.0) * np.exp(-0.5 * ((hours - 17.5) / rng.uniform(1.2, 2.5)) ** 2)
    raw = rng.uniform(0.02, 0.15) + am + pm + rng.normal(0.0, 0.05, size=24)
    lo, hi = raw.min(), raw.max()
    return (raw - lo) / (hi - lo)


def generate_world(config: WorldConfig, seed: int) -> World:
    config.validate()
    rng = _stream(seed, _STREAM_WORLD)
    hubs = np.column_stack(
        [
            rng.uniform(config.lat_min + 0.05, config.lat_max - 0.05, size=config.n_hubs),
            rng.uniform(config.lon_min + 0.05, config.lon_max - 0.05, size=config.n_hubs),
        ]
    )
    speeds = np.asarray(config.charging_speeds_kw, dtype=float)
    probs = np.asarray(config.charging_speed_probs, dtype=float)
    probs = probs / probs.sum()
    stations = []
    for i in range(config.n_stations):
        lat, lon = _sample_point(config, hubs, rng, config.hub_station_fraction)
        stations.append(
            Station(
                station_id=f"CS{i + 1:04d}",
                location=GeoPoint(float(lat), float(lon)),
                charging_speed_kw=float(rng.choice(speeds, p=probs)),
                ports=int(rng.integers(1, 9)),
                popularity_profile=popularity_profile(rng),
            )
        )
    model_idx = rng.integers(len(config.ev_models), size=config.n_evs)
    fleet = [Ev(f"EV{i + 1:04d}", config.ev_models[m]) for i, m in enumerate(model_idx)]
    return World(config=config, stations=stations, fleet=fleet, hubs=hubs)


def community_area(config: WorldConfig, point: GeoPoint) -> int:
    """Cell id 1..77 on a 7x11 grid over the bounding box."""
    fx = (point.lon - config.lon_min) / (config.lon_max - config.lon_min)
    fy = (point.lat - config.lat_min) / (config.lat_max - config.lat_min)
    col = min(GRID_COLS - 1, max(0, int(fx * GRID_COLS)))
    row = min(GRID_ROWS - 1, max(0, int(fy * GRID_ROWS)))
    return row * GRID_COLS + col + 1


def _journey_geometry(world: World, journey_index: int, k_for_ev: int, n_for_ev: int, seed: int):
    cfg = world.config
    rng = _stream(seed, _STREAM_JOURNEY, journey_index)
    home = int(rng.integers(len(world.hubs))) if len(world.hubs) else None
    o_lat, o_lon = _sample_point(cfg, world.hubs, rng, cfg.hub_trip_fraction, home)
    u = rng.random()
    if u < cfg.local_trip_fraction and home is not None:
        d_lat, d_lon = _sample_point(cfg, world.hubs, rng, 1.0, home)
    elif u < cfg.local_trip_fraction + 0.2 and home is not None:
        d_lat, d_lon = _sample_point(cfg, world.hubs, rng, 1.0)
    else:
        length = rng.uniform(cfg.trip_km_min, cfg.trip_km_max)
        heading = rng.uniform(0, 2 * math.pi)
        dlat, dlon = _km_to_deg(o_lat, length * math.cos(heading), length * math.sin(heading))
        d_lat, d_lon = _clip_to_box(cfg, o_lat + dlat, o_lon + dlon)
    origin, dest = GeoPoint(float(o_lat), float(o_lon)), GeoPoint(float(d_lat), float(d_lon))

    n_points = int(rng.integers(2, 7))
    fracs = np.sort(rng.uniform(0.05, 0.95, size=n_points - 2))
    points = [origin]
    for f in fracs:
        lat = o_lat + f * (d_lat - o_lat)
        lon = o_lon + f * (d_lon - o_lon)
        dy, dx = rng.normal(0.0, 0.25, size=2)
        jlat, jlon = _km_to_deg(lat, dy, dx)
        lat, lon = _clip_to_box(cfg, lat + jlat, lon + jlon)
        points.append(GeoPoint(float(lat), float(lon)))
    points.append(dest)

    # k-th journey of an EV lands on a later day than its (k-1)-th
    day_span = cfg.n_days / max(n_for_ev, 1)
    day = int(k_for_ev * day_span + rng.uniform(0, max(day_span - 1, 0)))
    hour = float(np.clip(rng.choice([rng.normal(8.5, 2.0), rng.normal(17.5, 2.5), rng.uniform(0, 24)]), 0, 23.5))
    start = datetime.fromisoformat(cfg.start_date) + timedelta(days=day, hours=hour)
    speed_kmh = rng.uniform(18, 35)
    seg_km = np.array([haversine_km(a, b) for a, b in zip(points[:-1], points[1:])])
    elapsed_h = np.concatenate([[0.0], np.cumsum(seg_km) / speed_kmh])
    times = [start + timedelta(hours=float(h)) for h in elapsed_h]
    return origin, dest, points, times, seg_km


def is_loop_journey(origin: GeoPoint, dest: GeoPoint, traveled_km: float, min_displacement_km: float) -> bool:
    return haversine_km(origin, dest) < min_displacement_km or traveled_km < min_displacement_km


def run_energy(start_wh: float, capacity_wh: float, consumption_wh_per_km: float, seg_km):
    """Decrement energy per segment; recharge to full when it falls below 20%.

    Returns ``(levels, consumption, recharge)``: energy at each waypoint
    (after any recharge), per-segment consumption and the energy added by
    the synthetic recharge following each segment.
    """
    seg_km = np.asarray(seg_km, dtype=float)
    levels = np.empty(seg_km.size + 1)
    consumption = consumption_wh_per_km * seg_km
    recharge = np.zeros(seg_km.size)
    e = float(start_wh)
    levels[0] = e
    for i, c in enumerate(consumption):
        e -= c
        if e < RECHARGE_THRESHOLD * capacity_wh:
            recharge[i] = capacity_wh - e
            e = float(capacity_wh)
        levels[i + 1] = e
    return levels, consumption, recharge


def simulate_journeys(world: World, n_journeys: int, seed: int) -> list[Journey]:
    """Simulate journeys round-robin over the fleet, chaining energy per EV."""
    cfg = world.config
    n_evs = len(world.fleet)
    per_ev: list[list[int]] = [[] for _ in range(n_evs)]
    for j in range(n_journeys):
        per_ev[j % n_evs].append(j)

    journeys: dict[int, Journey] = {}
    for ev_idx, ev in enumerate(world.fleet):
        model = ev.model
        ev_rng = _stream(seed, _STREAM_EV, ev_idx)
        energy = ev_rng.uniform(0.2, 1.0) * model.battery_capacity_wh
        idxs = per_ev[ev_idx]
        for k, j in enumerate(idxs):
            origin, dest, points, times, seg_km = _journey_geometry(world, j, k, len(idxs), seed)
            if is_loop_journey(origin, dest, float(seg_km.sum()), cfg.min_displacement_km):
                continue
            levels, cons, rech = run_energy(
                energy, model.battery_capacity_wh, model.consumption_wh_per_km, seg_km
            )
            journeys[j] = Journey(
                journey_index=j,
                journey_id=f"J{j:06d}",
                ev_id=ev.ev_id,
                model=model,
                origin=origin,
                destination=dest,
                timestamps=times,
                waypoints=points,
                segment_km=seg_km,
                segment_consumption_wh=cons,
                recharge_wh=rech,
                energy_level_wh=levels,
            )
            energy = float(levels[-1])
    return [journeys[j] for j in sorted(journeys)]


def available_energy(soc_pct: float, capacity_wh: float, cfg: RoleConfig) -> float:
    energy = soc_pct / 100.0 * capacity_wh
    threshold = cfg.soc_th_pct / 100.0 * capacity_wh
    return energy - threshold


def provider_energy(available_wh: float, travel_need_wh: float) -> float:
    return max(0.0, available_wh - travel_need_wh)


def consumer_deficit(energy_wh: float, capacity_wh: float, cfg: RoleConfig) -> float:
    return max(0.0, cfg.soc_target_pct / 100.0 * capacity_wh - energy_wh)


def role_draw(seed: int, journey_index: int) -> float:
    """Uniform draw used by the probabilistic role bands of one journey."""
    return float(_stream(seed, _STREAM_ROLE, journey_index).random())


def role_from_ratio(r: float, u: float, cfg: RoleConfig) -> str:
    """Piecewise role rule on the surplus ratio ``r`` given a uniform draw ``u``."""
    if r <= cfg.consumer_cutoff:
        return CONSUMER
    if r > cfg.provider_cutoff:
        return PROVIDER
    p = cfg.p_mid if r <= cfg.high_band_start else cfg.p_high
    return PROVIDER if u < p else CONSUMER


def surplus_ratio(journey: Journey, cfg: RoleConfig) -> tuple[float, float]:
    """Return ``(E_sur, r)`` evaluated at the journey origin.

    The travel need is the consumption rate times the full journey distance.
    """
    cap = journey.model.battery_capacity_wh
    soc_pct = 100.0 * journey.energy_level_wh[0] / cap
    need = journey.model.consumption_wh_per_km * journey.traveled_km
    e_sur = provider_energy(available_energy(soc_pct, cap, cfg), need)
    return e_sur, min(1.0, e_sur / cap)


def assign_role_and_quantity(journey: Journey, cfg: RoleConfig, seed: int) -> tuple[str, float]:
    e_sur, r = surplus_ratio(journey, cfg)
    role = role_from_ratio(r, role_draw(seed, journey.journey_index), cfg)
    if role == PROVIDER:
        q = max(0.0, e_sur)
        if q < cfg.e_min_trade_wh:
            q = 0.0
    else:
        q = consumer_deficit(journey.energy_level_wh[0], journey.model.battery_capacity_wh, cfg)
    journey.role, journey.quantity_wh, journey.surplus_ratio = role, round(q, 2), r
    return role, journey.quantity_wh


def assign_roles(journeys, cfg: RoleConfig, seed: int) -> None:
    cfg.validate()
    for j in journeys:
        assign_role_and_quantity(j, cfg, seed)


def floor_to_interval(ts: datetime, minutes: int = DECISION_INTERVAL_MINUTES) -> datetime:
    floored = (ts.minute // minutes) * minutes
    return ts.replace(minute=floored, second=0, microsecond=0)


class StationIndex:
    """Station arrays for vectorised distance queries."""

    def __init__(self, stations):
        self.stations = list(stations)
        self.ids = np.array([s.station_id for s in self.stations], dtype=str)
        self.lats = np.array([s.location.lat for s in self.stations])
        self.lons = np.array([s.location.lon for s in self.stations])
        self.speeds = np.array([s.charging_speed_kw for s in self.stations])
        self.profiles = (
            np.vstack([s.popularity_profile for s in self.stations]) if self.stations else np.zeros((0, 24))
        )
        self.row = {sid: i for i, sid in enumerate(self.ids)}

    def candidates(self, point: GeoPoint, hour: int, geo: GeoConfig) -> list[Candidate]:
        if not self.stations:
            return []
        d = haversine_many(point.lat, point.lon, self.lats, self.lons)
        found = search_radii(self.ids, d, geo.min_count, geo.r_start_km, geo.r_step_km, geo.r_max_km)
        out = []
        for sid, dist in found:
            i = self.row[sid]
            out.append(Candidate(sid, dist, float(self.speeds[i]), float(self.profiles[i, hour])))
        return out


def build_decision_events(journeys, stations, geo: GeoConfig, world_config: WorldConfig) -> list[DecisionEvent]:
    """One event per waypoint, timestamp floored to the 30-minute grid.

    Zero-candidate events are kept (``labelable`` is False) so they can be
    counted; labeling and training skip them.
    """
    index = stations if isinstance(stations, StationIndex) else StationIndex(stations)
    events = []
    for j in journeys:
        if j.role is None:
            raise ValueError(f"journey {j.journey_id} has no role assigned")
        cap = j.model.battery_capacity_wh
        for k, (ts, pt) in enumerate(zip(j.timestamps, j.waypoints)):
            bucket = floor_to_interval(ts)
            energy = float(j.energy_level_wh[k])
            events.append(
                DecisionEvent(
                    event_id=f"{j.journey_id}_{k:02d}",
                    ev_id=j.ev_id,
                    journey_id=j.journey_id,
                    timestamp=bucket,
                    location=pt,
                    community_area=community_area(world_config, pt),
                    role=j.role,
                    soc_e=float(np.clip(energy / cap, 0.0, 1.0)),
                    energy_level_wh=energy,
                    battery_capacity_wh=cap,
                    quantity_wh=float(j.quantity_wh),
                    model_id=j.model.model_id,
                    candidates=index.candidates(pt, bucket.hour, geo),
                )
            )
    return events
