"""Great-circle distance and adaptive-radius candidate search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class StationRef:
    station_id: str
    location: GeoPoint


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(1 - h))


def haversine_many(lat: float, lon: float, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorised haversine from one point to arrays of points (km)."""
    phi1 = np.radians(lat)
    phi2 = np.radians(lats)
    dphi = phi2 - phi1
    dlam = np.radians(lons - lon)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    h = np.clip(h, 0.0, 1.0)
    return 2 * EARTH_RADIUS_KM * np.arctan2(np.sqrt(h), np.sqrt(1 - h))


def _radius_grid(r_start_km: float, r_step_km: float, r_max_km: float) -> list[float]:
    radii = []
    i = 0
    while True:
        r = r_start_km + i * r_step_km
        # tolerate float drift on the last step
        if r > r_max_km + 1e-9:
            break
        radii.append(min(r, r_max_km))
        i += 1
    if radii[-1] < r_max_km:
        radii.append(r_max_km)
    return radii


def find_candidates(
    loc: GeoPoint,
    stations: Sequence[StationRef],
    min_count: int = 3,
    r_start_km: float = 1.0,
    r_step_km: float = 1.0,
    r_max_km: float = 10.0,
) -> list[tuple[str, float]]:
    """Expand the search radius until at least ``min_count`` stations fall inside.

    Returns ``(station_id, distance_km)`` pairs for every station within the
    first radius that satisfies ``min_count`` (or within ``r_max_km`` if none
    does), sorted by distance then station id.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not 0 < r_start_km <= r_max_km:
        raise ValueError("need 0 < r_start_km <= r_max_km")
    if r_step_km <= 0:
        raise ValueError("r_step_km must be positive")
    if not stations:
        return []

    best: dict[str, float] = {}
    for st in stations:
        d = haversine_km(loc, st.location)
        if st.station_id not in best or d < best[st.station_id]:
            best[st.station_id] = d
    ids = np.array(list(best.keys()), dtype=str)
    dists = np.array(list(best.values()), dtype=float)
    return search_radii(ids, dists, min_count, r_start_km, r_step_km, r_max_km)


def search_radii(
    ids: np.ndarray,
    dists: np.ndarray,
    min_count: int,
    r_start_km: float,
    r_step_km: float,
    r_max_km: float,
) -> list[tuple[str, float]]:
    """Radius-expansion step of :func:`find_candidates` on precomputed distances.

    ``ids`` must already be unique.
    """
    if len(ids) == 0:
        return []
    order = np.lexsort((np.asarray(ids, dtype=str), dists))
    sorted_d = dists[order]
    n_inside = 0
    for r in _radius_grid(r_start_km, r_step_km, r_max_km):
        n_inside = int(np.searchsorted(sorted_d, r, side="right"))
        if n_inside >= min_count:
            break
    return [(str(ids[i]), float(dists[i])) for i in order[:n_inside]]
