"""Geographic domain, great-circle distances, polygon constraints and QMC
event sampling."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from ._errors import EmptySetError, InputError, InvalidRegionError

KM_PER_DEGREE = 111.19


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InputError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise InputError(f"coordinate out of range ({self.lat}, {self.lon})")


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box over latitude, longitude, depth (km) and magnitude."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    depth_min: float
    depth_max: float
    mag_min: float
    mag_max: float

    def __post_init__(self):
        for lo, hi, name in (
            (self.lat_min, self.lat_max, "lat"),
            (self.lon_min, self.lon_max, "lon"),
            (self.depth_min, self.depth_max, "depth"),
            (self.mag_min, self.mag_max, "mag"),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise InputError(f"domain axis {name}: need min < max, got [{lo}, {hi}]")
        if self.depth_min < 0:
            raise InputError("depth_min must be >= 0")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.lat_min, self.lon_min, self.depth_min, self.mag_min])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.lat_max, self.lon_max, self.depth_max, self.mag_max])

    @property
    def area(self) -> float:
        """Lat-lon area in square degrees."""
        return (self.lat_max - self.lat_min) * (self.lon_max - self.lon_min)

    def contains(self, lat, lon, depth=None, mag=None):
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        inside = (lat >= self.lat_min) & (lat <= self.lat_max)
        inside &= (lon >= self.lon_min) & (lon <= self.lon_max)
        if depth is not None:
            depth = np.asarray(depth)
            inside &= (depth >= self.depth_min) & (depth <= self.depth_max)
        if mag is not None:
            mag = np.asarray(mag)
            inside &= (mag >= self.mag_min) & (mag <= self.mag_max)
        return inside

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__})


# 40N-42N, 112W-108.36W, 0-40 km depth; magnitudes capped at 4 for QMC mapping.
MONITORING_BOX = Domain(40.0, 42.0, -112.0, -108.36, 0.0, 40.0, 0.5, 4.0)


def central_angle(lat1, lon1, lat2, lon2):
    """Haversine central angle in degrees; broadcasts over array inputs."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dphi = p2 - p1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlam / 2) ** 2
    return np.degrees(2 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))))


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle separation of two points in degrees of arc."""
    return float(central_angle(a.lat, a.lon, b.lat, b.lon))


def degrees_to_km(d):
    return d * KM_PER_DEGREE


def unit_to_events(u, domain: Domain, prior=None):
    """Map points of the unit 4-cube to events inside ``domain``.

    Columns are (lat, lon, depth, magnitude). The magnitude column goes
    through the prior's magnitude quantile function (truncated to
    ``domain.mag_max``) when ``prior`` is given, otherwise it is affine.
    """
    from .priors import Event

    u = np.atleast_2d(np.asarray(u, dtype=float))
    x = domain.lower + u * (domain.upper - domain.lower)
    if prior is not None:
        x[:, 3] = prior.magnitude_quantile(u[:, 3], cap=domain.mag_max)
    return [Event(float(a), float(b), float(c), float(d)) for a, b, c, d in x]


def sobol_unit(n: int, d: int, seed: int) -> np.ndarray:
    """``n`` scrambled Sobol points in [0, 1)^d, skipping the first point."""
    engine = qmc.Sobol(d=d, scramble=True, seed=np.random.default_rng(seed))
    engine.fast_forward(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(n)


def sobol_events(n: int, domain: Domain, seed: int, prior=None):
    """Quasi-Monte Carlo event set over ``domain``.

    Parameters
    ----------
    n : int
        Number of events, at least 1.
    domain : Domain
        Box the events are mapped into.
    seed : int
        Scrambling seed; identical arguments give identical lists.
    prior : PriorSpec, optional
        When given, magnitudes follow its (capped) magnitude quantile.
    """
    if n < 1:
        raise EmptySetError("sobol_events needs n >= 1")
    return unit_to_events(sobol_unit(n, 4, seed), domain, prior)


class PolygonRegion:
    """Polygon in the (lon, lat) plane: an outer ring plus optional holes.

    Rings are lists of ``GeoPoint``; each is closed on construction if the
    last vertex differs from the first.
    """

    def __init__(self, rings: Sequence[Sequence[GeoPoint]]):
        if not rings:
            raise InvalidRegionError("polygon needs at least one ring")
        closed = []
        for ring in rings:
            pts = list(ring)
            if len(pts) and pts[0] != pts[-1]:
                pts.append(pts[0])
            distinct = {(p.lat, p.lon) for p in pts}
            if len(distinct) < 3:
                raise InvalidRegionError("ring needs at least 3 distinct vertices")
            xy = np.array([[p.lon, p.lat] for p in pts])
            if _collinear(xy):
                raise InvalidRegionError("degenerate ring: all vertices collinear")
            closed.append(pts)
        self.rings = closed
        self._xy = [np.array([[p.lon, p.lat] for p in r]) for r in closed]

    @classmethod
    def from_geojson(cls, coordinates) -> "PolygonRegion":
        """Build from GeoJSON polygon coordinates ``[[[lon, lat], ...], ...]``."""
        return cls([[GeoPoint(float(lat), float(lon)) for lon, lat in ring] for ring in coordinates])

    def to_geojson(self):
        return [[[p.lon, p.lat] for p in ring] for ring in self.rings]

    @property
    def bounds(self):
        """(lat_min, lat_max, lon_min, lon_max) of the outer ring."""
        xy = self._xy[0]
        return xy[:, 1].min(), xy[:, 1].max(), xy[:, 0].min(), xy[:, 0].max()

    def contains(self, lat, lon, tol: float = 1e-12):
        """Vectorized boundary-inclusive even-odd test."""
        x = np.atleast_1d(np.asarray(lon, dtype=float))
        y = np.atleast_1d(np.asarray(lat, dtype=float))
        inside = np.zeros(x.shape, dtype=bool)
        on_edge = np.zeros(x.shape, dtype=bool)
        for xy in self._xy:
            x1, y1 = xy[:-1, 0], xy[:-1, 1]
            x2, y2 = xy[1:, 0], xy[1:, 1]
            for a, b, c, d in zip(x1, y1, x2, y2):
                on_edge |= _segment_distance(x, y, a, b, c, d) <= tol
                crosses = (b > y) != (d > y)
                with np.errstate(divide="ignore", invalid="ignore"):
                    xint = a + (y - b) * (c - a) / (d - b)
                inside ^= crosses & (x < xint)
        out = inside | on_edge
        return out if np.ndim(lat) or np.ndim(lon) else bool(out[0])

    def boundary_distance(self, lat, lon):
        """Planar distance in degrees from points to the nearest ring edge."""
        x = np.atleast_1d(np.asarray(lon, dtype=float))
        y = np.atleast_1d(np.asarray(lat, dtype=float))
        best = np.full(x.shape, np.inf)
        for xy in self._xy:
            for (a, b), (c, d) in zip(xy[:-1], xy[1:]):
                best = np.minimum(best, _segment_distance(x, y, a, b, c, d))
        return best if np.ndim(lat) or np.ndim(lon) else float(best[0])


def _collinear(xy: np.ndarray) -> bool:
    d = xy - xy[0]
    cross = d[:, 0][:, None] * d[:, 1][None, :] - d[:, 1][:, None] * d[:, 0][None, :]
    scale = max(np.abs(d).max(), 1e-300) ** 2
    return bool(np.all(np.abs(cross) <= 1e-14 * scale))


def _segment_distance(x, y, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return np.hypot(x - ax, y - ay)
    t = np.clip(((x - ax) * dx + (y - ay) * dy) / L2, 0.0, 1.0)
    return np.hypot(x - (ax + t * dx), y - (ay + t * dy))


def point_in_polygon(p: GeoPoint, region: PolygonRegion) -> bool:
    """Even-odd ray crossing test; points on an edge count as inside."""
    return bool(region.contains(p.lat, p.lon))


def region_bounds(region):
    """(lat_min, lat_max, lon_min, lon_max) for a Domain or PolygonRegion."""
    if isinstance(region, Domain):
        return region.lat_min, region.lat_max, region.lon_min, region.lon_max
    return region.bounds


def region_contains(region, lat, lon):
    if isinstance(region, Domain):
        return region.contains(lat, lon)
    return region.contains(lat, lon)
