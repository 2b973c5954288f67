"""Geographic and temporal primitives.

Everything here is a pure function over frozen values. Coordinates are WGS84
decimal degrees, distances are meters on a sphere of radius ``EARTH_RADIUS_M``,
times are integer epoch seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

EARTH_RADIUS_M = 6_371_000.0
MAX_PERSON_ID_LEN = 64

DEFAULT_EPSILON_M = 2.0
DEFAULT_DELTA_T_S = 300


def check_person_id(person: str) -> str:
    if not isinstance(person, str) or not person:
        raise ValidationError(f"person id must be a non-empty string, got {person!r}")
    if len(person) > MAX_PERSON_ID_LEN:
        raise ValidationError(f"person id longer than {MAX_PERSON_ID_LEN} chars: {person[:16]}...")
    return person


def check_timestamp(t) -> int:
    if isinstance(t, bool) or not isinstance(t, (int, np.integer)):
        if isinstance(t, float) and t.is_integer():
            t = int(t)
        else:
            raise ValidationError(f"timestamp must be integer epoch seconds, got {t!r}")
    t = int(t)
    if t < 0:
        raise ValidationError(f"timestamp must be >= 0, got {t}")
    return t


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
            raise ValidationError(f"coordinates out of range: ({self.lat}, {self.lon})")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True, slots=True)
class TrajectoryPoint:
    person: str
    loc: GeoPoint
    time: int

    def __post_init__(self):
        check_person_id(self.person)
        object.__setattr__(self, "time", check_timestamp(self.time))


@dataclass(frozen=True, slots=True)
class Area:
    area_id: str
    center: GeoPoint
    radius: float

    def __post_init__(self):
        if not self.area_id:
            raise ValidationError("area id must be non-empty")
        if not (0.0 < self.radius <= 10_000.0):
            raise ValidationError(f"area radius must be in (0, 10000] m, got {self.radius}")


@dataclass(frozen=True, slots=True)
class ProximityConfig:
    """Spatial (meters) and temporal (seconds) tolerances of the contact predicate."""

    epsilon: float = DEFAULT_EPSILON_M
    delta_t: int = DEFAULT_DELTA_T_S

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1000.0):
            raise ValidationError(f"epsilon must be in [0, 1000] m, got {self.epsilon}")
        if not (0 <= self.delta_t <= 86_400):
            raise ValidationError(f"delta_t must be in [0, 86400] s, got {self.delta_t}")


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def haversine_np(lat1, lon1, lat2, lon2):
    """Vectorised :func:`haversine` over degree arrays (broadcasting)."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.subtract(lon2, lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def colocated(p: TrajectoryPoint, q: TrajectoryPoint, cfg: ProximityConfig) -> bool:
    if p.person == q.person:
        raise ValidationError("colocated() compares two different persons")
    if abs(p.time - q.time) > cfg.delta_t:
        return False
    return haversine(p.loc, q.loc) <= cfg.epsilon


def area_contains(area: Area, loc: GeoPoint) -> bool:
    return haversine(area.center, loc) <= area.radius
