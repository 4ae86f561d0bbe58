"""Sensor networks and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._errors import InputError
from .geo import Domain, GeoPoint


@dataclass(frozen=True)
class Station:
    loc: GeoPoint
    snr_offset: float = 0.0

    def to_dict(self):
        return {"lat": self.loc.lat, "lon": self.loc.lon, "snr_offset": self.snr_offset}


@dataclass(frozen=True)
class SensorNetwork:
    """Ordered stations with per-station SNR offsets."""

    stations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "stations", tuple(self.stations))

    def __len__(self):
        return len(self.stations)

    def __iter__(self):
        return iter(self.stations)

    @property
    def lats(self) -> np.ndarray:
        return np.array([s.loc.lat for s in self.stations], dtype=float)

    @property
    def lons(self) -> np.ndarray:
        return np.array([s.loc.lon for s in self.stations], dtype=float)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([s.snr_offset for s in self.stations], dtype=float)

    def add(self, lat: float, lon: float, snr_offset: float = 0.0) -> "SensorNetwork":
        return SensorNetwork(self.stations + (Station(GeoPoint(lat, lon), snr_offset),))

    def with_offsets(self, offset: float) -> "SensorNetwork":
        return SensorNetwork(tuple(Station(s.loc, offset) for s in self.stations))

    def permuted(self, order) -> "SensorNetwork":
        return SensorNetwork(tuple(self.stations[i] for i in order))

    @classmethod
    def from_arrays(cls, lats, lons, offsets=None) -> "SensorNetwork":
        offsets = np.zeros(len(lats)) if offsets is None else np.broadcast_to(offsets, (len(lats),))
        return cls(tuple(Station(GeoPoint(float(a), float(b)), float(o))
                         for a, b, o in zip(lats, lons, offsets)))

    def to_dict(self):
        return {"stations": [s.to_dict() for s in self.stations]}

    @classmethod
    def from_dict(cls, d) -> "SensorNetwork":
        try:
            return cls(tuple(Station(GeoPoint(float(s["lat"]), float(s["lon"])),
                                     float(s.get("snr_offset", 0.0))) for s in d["stations"]))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed network: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SensorNetwork":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def grid_network(domain: Domain, n_lat: int, n_lon: int, snr_offset: float = 0.0) -> SensorNetwork:
    """Evenly spaced stations at cell centres of an ``n_lat`` x ``n_lon`` grid."""
    lat = domain.lat_min + (np.arange(n_lat) + 0.5) * (domain.lat_max - domain.lat_min) / n_lat
    lon = domain.lon_min + (np.arange(n_lon) + 0.5) * (domain.lon_max - domain.lon_min) / n_lon
    LA, LO = np.meshgrid(lat, lon, indexing="ij")
    return SensorNetwork.from_arrays(LA.ravel(), LO.ravel(), snr_offset)
