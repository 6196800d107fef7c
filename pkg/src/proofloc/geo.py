"""Coordinates stored as integer micro-degrees, haversine distance, range checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

EARTH_RADIUS_M = 6_371_000.0
MICRO = 1_000_000

LAT_LIMIT = 90 * MICRO
LON_LIMIT = 180 * MICRO

DEFAULT_MAX_RANGE_M = 100.0


class InvalidCoordinates(ValueError):
    pass


@dataclass(frozen=True, order=True)
class GeoLocation:
    lat_microdeg: int
    lon_microdeg: int

    def __post_init__(self) -> None:
        if not isinstance(self.lat_microdeg, int) or not isinstance(self.lon_microdeg, int):
            raise InvalidCoordinates("coordinates must be integer micro-degrees")
        if not -LAT_LIMIT <= self.lat_microdeg <= LAT_LIMIT:
            raise InvalidCoordinates(f"latitude out of range: {self.lat_microdeg}")
        if not -LON_LIMIT <= self.lon_microdeg < LON_LIMIT:
            raise InvalidCoordinates(f"longitude out of range: {self.lon_microdeg}")

    @classmethod
    def from_degrees(cls, lat: float, lon: float) -> GeoLocation:
        return cls(round(lat * MICRO), round(lon * MICRO))

    @property
    def lat(self) -> float:
        return self.lat_microdeg / MICRO

    @property
    def lon(self) -> float:
        return self.lon_microdeg / MICRO

    def offset(self, east_m: float, north_m: float) -> GeoLocation:
        """Approximate local displacement; fine for the sub-kilometre worlds we simulate."""
        dlat = math.degrees(north_m / EARTH_RADIUS_M)
        dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(self.lat))))
        lon = (self.lon + dlon + 180.0) % 360.0 - 180.0
        lat = max(-90.0, min(90.0, self.lat + dlat))
        return GeoLocation.from_degrees(lat, lon)


@dataclass(frozen=True)
class RangeParams:
    max_range_m: float = DEFAULT_MAX_RANGE_M

    def __post_init__(self) -> None:
        if not self.max_range_m > 0:
            raise ValueError("max_range_m must be positive")


@lru_cache(maxsize=1 << 17)
def distance_m(a: GeoLocation, b: GeoLocation) -> float:
    """Great-circle distance on a sphere of radius 6,371 km."""
    if a == b:
        return 0.0
    phi1 = math.radians(a.lat_microdeg / MICRO)
    phi2 = math.radians(b.lat_microdeg / MICRO)
    dphi = phi2 - phi1
    dlmb = math.radians((b.lon_microdeg - a.lon_microdeg) / MICRO)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def within_range(a: GeoLocation, b: GeoLocation, r: RangeParams) -> bool:
    return distance_m(a, b) <= r.max_range_m
