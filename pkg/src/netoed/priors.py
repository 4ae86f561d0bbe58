"""Event priors (uniform and fault-box mixture) and importance weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from ._errors import InputError, UnsupportedSampleError
from .geo import Domain, GeoPoint


@dataclass(frozen=True)
class Event:
    """Candidate source. Depth in km, moment magnitude dimensionless."""

    lat: float
    lon: float
    depth: float
    mag: float

    def __post_init__(self):
        if not self.depth >= 0:
            raise InputError(f"event depth must be >= 0, got {self.depth}")

    @property
    def loc(self) -> GeoPoint:
        return GeoPoint(self.lat, self.lon)

    def as_array(self) -> np.ndarray:
        return np.array([self.lat, self.lon, self.depth, self.mag])


def events_to_array(events) -> np.ndarray:
    """(n, 4) array of lat, lon, depth, mag."""
    if isinstance(events, Event):
        events = [events]
    return np.array([[e.lat, e.lon, e.depth, e.mag] for e in events], dtype=float).reshape(-1, 4)


@dataclass(frozen=True)
class MixtureSpec:
    """Fault-box spatial mixture: a point source, a N-S fault strip and a
    uniform background. ``gauss_cov`` is a (lat, lon) covariance in deg^2."""

    gauss_center: tuple = (40.25, -109.0)
    gauss_cov: tuple = ((0.125, 0.0), (0.0, 0.125))
    gauss_weight: float = 0.49
    strip_lon_mean: float = -110.19
    strip_lon_std: float = 0.125
    strip_weight: float = 0.49
    background_weight: float = 0.02

    def __post_init__(self):
        total = self.gauss_weight + self.strip_weight + self.background_weight
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"mixture weights sum to {total}, not 1")
        if min(self.gauss_weight, self.strip_weight, self.background_weight) < 0:
            raise InputError("mixture weights must be non-negative")
        cov = np.asarray(self.gauss_cov, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise InputError("gauss_cov must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise InputError("gauss_cov must be positive definite")
        if self.strip_lon_std <= 0:
            raise InputError("strip_lon_std must be positive")

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.gauss_weight, self.strip_weight, self.background_weight])

    def to_dict(self) -> dict:
        return {
            "gauss2d": {
                "center": list(self.gauss_center),
                "covariance": [list(r) for r in self.gauss_cov],
                "weight": self.gauss_weight,
            },
            "gauss_strip": {
                "lon_mean": self.strip_lon_mean,
                "lon_std": self.strip_lon_std,
                "weight": self.strip_weight,
            },
            "background": {"weight": self.background_weight},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureSpec":
        g = d["gauss2d"]
        cov = np.asarray(g["covariance"], dtype=float)
        if g.get("covariance_convention", "variance") == "std":
            cov = cov * np.abs(cov)
        s = d["gauss_strip"]
        return cls(
            gauss_center=tuple(float(v) for v in g["center"]),
            gauss_cov=tuple(tuple(float(v) for v in row) for row in cov),
            gauss_weight=float(g["weight"]),
            strip_lon_mean=float(s["lon_mean"]),
            strip_lon_std=float(s["lon_std"]),
            strip_weight=float(s["weight"]),
            background_weight=float(d["background"]["weight"]),
        )


@dataclass(frozen=True)
class PriorSpec:
    """Prior over events: spatial part (uniform or fault-box mixture, both
    restricted to the domain box), uniform depth, exponential magnitude."""

    kind: str
    domain: Domain
    mag_rate: float = math.log(10.0)
    mag_min: float = 0.5
    mixture: Optional[MixtureSpec] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "fault-box-mixture"):
            raise InputError(f"unknown prior kind {self.kind!r}")
        if not self.mag_rate > 0:
            raise InputError("mag_rate must be positive")
        if self.kind == "fault-box-mixture" and self.mixture is None:
            object.__setattr__(self, "mixture", MixtureSpec())

    @classmethod
    def uniform(cls, domain: Domain, mag_rate=math.log(10.0), mag_min=0.5):
        return cls("uniform", domain, mag_rate, mag_min)

    @classmethod
    def fault_box(cls, domain: Domain, mixture=None, mag_rate=math.log(10.0), mag_min=0.5):
        return cls("fault-box-mixture", domain, mag_rate, mag_min, mixture or MixtureSpec())

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "domain": self.domain.to_dict(),
            "mag_rate": self.mag_rate,
            "mag_min": self.mag_min,
        }
        if self.kind == "fault-box-mixture":
            d["mixture"] = self.mixture.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, domain: Domain | None = None) -> "PriorSpec":
        dom = Domain.from_dict(d["domain"]) if "domain" in d else domain
        if dom is None:
            raise InputError("prior needs a domain")
        mixture = MixtureSpec.from_dict(d["mixture"]) if "mixture" in d else None
        return cls(
            d["kind"],
            dom,
            float(d.get("mag_rate", math.log(10.0))),
            float(d.get("mag_min", 0.5)),
            mixture,
        )

    def magnitude_quantile(self, u, cap: float | None = None):
        """Inverse CDF of the magnitude prior, optionally truncated at ``cap``."""
        u = np.asarray(u, dtype=float)
        lam = self.mag_rate
        mass = 1.0 if cap is None else -math.expm1(-lam * (cap - self.mag_min))
        return self.mag_min - np.log1p(-u * mass) / lam

    @cached_property
    def _gauss_box_mass(self) -> float:
        mx = self.mixture
        dom = self.domain
        cov = np.asarray(mx.gauss_cov)
        c = np.asarray(mx.gauss_center)
        if cov[0, 1] == 0.0:
            sd = np.sqrt(np.diag(cov))
            plat = stats.norm.cdf(dom.lat_max, c[0], sd[0]) - stats.norm.cdf(dom.lat_min, c[0], sd[0])
            plon = stats.norm.cdf(dom.lon_max, c[1], sd[1]) - stats.norm.cdf(dom.lon_min, c[1], sd[1])
            return float(plat * plon)
        mvn = stats.multivariate_normal(c, cov)
        return float(mvn.cdf([dom.lat_max, dom.lon_max], lower_limit=[dom.lat_min, dom.lon_min]))

    @cached_property
    def _strip_box_mass(self) -> float:
        mx = self.mixture
        dom = self.domain
        return float(
            stats.norm.cdf(dom.lon_max, mx.strip_lon_mean, mx.strip_lon_std)
            - stats.norm.cdf(dom.lon_min, mx.strip_lon_mean, mx.strip_lon_std)
        )

    def spatial_density(self, lat, lon):
        """Lat-lon density in 1/deg^2; zero outside the domain box."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        dom = self.domain
        inside = dom.contains(lat, lon)
        uniform = 1.0 / dom.area
        if self.kind == "uniform":
            return np.where(inside, uniform, 0.0)
        mx = self.mixture
        pts = np.stack([lat, lon], axis=-1)
        g = stats.multivariate_normal(np.asarray(mx.gauss_center), np.asarray(mx.gauss_cov)).pdf(pts)
        g = g / self._gauss_box_mass
        s = stats.norm.pdf(lon, mx.strip_lon_mean, mx.strip_lon_std) / self._strip_box_mass
        s = s / (dom.lat_max - dom.lat_min)
        dens = mx.gauss_weight * g + mx.strip_weight * s + mx.background_weight * uniform
        return np.where(inside, dens, 0.0)


@dataclass
class WeightedEventSet:
    """Events paired with self-normalized log importance weights."""

    events: list
    log_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.events = list(self.events)
        n = len(self.events)
        if self.log_weights is None:
            self.log_weights = np.full(n, -math.log(n)) if n else np.zeros(0)
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.shape != (n,):
            raise InputError("log_weights length must match events")
        if n:
            lw = lw - logsumexp(lw)
        if np.any(np.isnan(lw)) or np.any(lw == np.inf):
            raise InputError("log weights must be finite or -inf")
        self.log_weights = lw

    def __len__(self):
        return len(self.events)

    def __getitem__(self, i):
        return self.events[i]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @cached_property
    def coords(self) -> np.ndarray:
        return events_to_array(self.events)

    def subset(self, idx) -> "WeightedEventSet":
        idx = np.asarray(idx)
        return WeightedEventSet([self.events[i] for i in idx], self.log_weights[idx])


def log_prior_density(e, spec: PriorSpec):
    """Log prior density of an event (or an (n, 4) array of events).

    Returns ``-inf`` outside the support: off the lat-lon-depth box or
    below the magnitude floor.
    """
    x = e.as_array()[None, :] if isinstance(e, Event) else np.atleast_2d(np.asarray(e, dtype=float))
    lat, lon, depth, mag = x.T
    dom = spec.domain
    with np.errstate(divide="ignore"):
        lp = np.log(spec.spatial_density(lat, lon))
    in_depth = (depth >= dom.depth_min) & (depth <= dom.depth_max)
    lp = lp + np.where(in_depth, -math.log(dom.depth_max - dom.depth_min), -np.inf)
    lam = spec.mag_rate
    lp = lp + np.where(mag >= spec.mag_min, math.log(lam) - lam * (mag - spec.mag_min), -np.inf)
    return float(lp[0]) if isinstance(e, Event) else lp


def importance_weights(events, target: PriorSpec, proposal: PriorSpec) -> WeightedEventSet:
    """Self-normalized weights proportional to target/proposal density."""
    x = events_to_array(events)
    lq = log_prior_density(x, proposal)
    if np.any(~np.isfinite(lq)):
        bad = int(np.flatnonzero(~np.isfinite(lq))[0])
        raise UnsupportedSampleError(f"proposal density is zero at event {bad}")
    lp = log_prior_density(x, target)
    return WeightedEventSet(list(events), lp - lq)


def sample_prior(spec: PriorSpec, n: int, seed: int, return_components: bool = False):
    """I.i.d. draws from the prior.

    For the fault-box mixture a component is chosen first (0 point source,
    1 fault strip, 2 background) and the Gaussian parts are rejection
    sampled against the domain box. With ``return_components`` the
    component labels are returned as a second value.
    """
    rng = np.random.default_rng(seed)
    dom = spec.domain
    if n <= 0:
        return ([], np.zeros(0, dtype=int)) if return_components else []
    lat = rng.uniform(dom.lat_min, dom.lat_max, n)
    lon = rng.uniform(dom.lon_min, dom.lon_max, n)
    comp = np.full(n, 2, dtype=int)
    if spec.kind == "fault-box-mixture":
        mx = spec.mixture
        comp = rng.choice(3, size=n, p=mx.weights)
        cov = np.asarray(mx.gauss_cov)
        idx = np.flatnonzero(comp == 0)
        while idx.size:
            draw = rng.multivariate_normal(np.asarray(mx.gauss_center), cov, size=idx.size)
            ok = dom.contains(draw[:, 0], draw[:, 1])
            lat[idx[ok]] = draw[ok, 0]
            lon[idx[ok]] = draw[ok, 1]
            idx = idx[~ok]
        idx = np.flatnonzero(comp == 1)
        while idx.size:
            draw = rng.normal(mx.strip_lon_mean, mx.strip_lon_std, size=idx.size)
            ok = (draw >= dom.lon_min) & (draw <= dom.lon_max)
            lon[idx[ok]] = draw[ok]
            idx = idx[~ok]
    depth = rng.uniform(dom.depth_min, dom.depth_max, n)
    mag = spec.mag_min + rng.exponential(1.0 / spec.mag_rate, n)
    events = [Event(*map(float, row)) for row in zip(lat, lon, depth, mag)]
    return (events, comp) if return_components else events
