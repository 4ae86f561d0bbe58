"""Layered velocity models, travel-time ensemble statistics and the
travel-time uncertainty surrogates (mean table, sigma polynomial,
squared-exponential station correlation)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._errors import (
    DegenerateGridError,
    InputError,
    OutOfDomainError,
    OutOfModelError,
    UndefinedCorrelationError,
)

CORRELATION_MODES = ("epicentral-difference", "station-separation", "independent")


@dataclass(frozen=True)
class VelocityProfile:
    """1-D P-velocity stack over a halfspace.

    ``layers`` is a sequence of (thickness km, vp km/s) from the surface
    down. The halfspace extends to ``max_depth``.
    """

    layers: tuple
    halfspace_vp: float
    max_depth: float = 200.0

    def __post_init__(self):
        layers = tuple((float(h), float(v)) for h, v in self.layers)
        object.__setattr__(self, "layers", layers)
        vs = [v for _, v in layers] + [self.halfspace_vp]
        if any(h <= 0 for h, _ in layers):
            raise InputError("layer thickness must be positive")
        if any(v <= 0 for v in vs):
            raise InputError("velocities must be positive")
        if any(b < a for a, b in zip(vs, vs[1:])):
            raise InputError("velocity must be non-decreasing with depth")
        if self.max_depth <= sum(h for h, _ in layers):
            raise InputError("max_depth must lie inside the halfspace")

    @property
    def velocities(self) -> np.ndarray:
        return np.array([v for _, v in self.layers] + [self.halfspace_vp])

    @property
    def tops(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([h for h, _ in self.layers])])

    def to_dict(self):
        return {"layers": [list(l) for l in self.layers], "halfspace_vp": self.halfspace_vp,
                "max_depth": self.max_depth}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(tuple(l) for l in d["layers"]), float(d["halfspace_vp"]),
                   float(d.get("max_depth", 200.0)))


def travel_time(p: VelocityProfile, delta, x):
    """First-arrival P time in seconds.

    Minimum of the straight-ray direct wave (slowness averaged along the
    straight path) and every head wave along an interface below the
    source, each head wave counted only beyond its critical distance.
    ``delta`` and ``x`` (km) broadcast against each other.
    """
    delta, x = np.broadcast_arrays(np.asarray(delta, dtype=float), np.asarray(x, dtype=float))
    if np.any(delta < 0) or np.any(~np.isfinite(delta)):
        raise InputError("epicentral distance must be finite and >= 0")
    if np.any(x < 0) or np.any(x > p.max_depth) or np.any(~np.isfinite(x)):
        raise OutOfModelError(f"source depth outside model [0, {p.max_depth}] km")
    v = p.velocities
    tops = p.tops
    bots = np.concatenate([tops[1:], [p.max_depth]])

    # vertical slowness integral from the surface down to x
    vert = np.zeros_like(x)
    for top, bot, vi in zip(tops, bots, v):
        vert += np.clip(np.minimum(x, bot) - top, 0.0, None) / vi
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.where(x > 0, np.hypot(delta, x) * vert / np.where(x > 0, x, 1.0), delta / v[0])
    best = direct

    for j in range(len(p.layers)):
        vref = v[j + 1]
        above = v[: j + 1]
        if np.any(above >= vref):
            continue
        h_rcv = bots[: j + 1] - tops[: j + 1]
        # leg from the source down to the refractor
        h_src = np.clip(bots[: j + 1][:, None] - np.maximum(tops[: j + 1][:, None], x.ravel()[None, :]), 0.0, None)
        h_src = h_src.reshape((j + 1,) + x.shape)
        h_tot = h_rcv.reshape((-1,) + (1,) * x.ndim) + h_src
        cosq = np.sqrt(1.0 / above**2 - 1.0 / vref**2).reshape((-1,) + (1,) * x.ndim)
        tanq = (above / np.sqrt(vref**2 - above**2)).reshape((-1,) + (1,) * x.ndim)
        head = delta / vref + np.sum(h_tot * cosq, axis=0)
        xcrit = np.sum(h_tot * tanq, axis=0)
        valid = (x <= bots[j]) & (delta >= xcrit)
        best = np.where(valid, np.minimum(best, head), best)
    return best if best.ndim else float(best)


@dataclass(frozen=True)
class Ensemble:
    profiles: tuple

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if len(self.profiles) < 2:
            raise InputError("ensemble needs at least 2 members")

    def __len__(self):
        return len(self.profiles)

    def times(self, delta, x) -> np.ndarray:
        """Member travel times, shape (N,) + broadcast(delta, x).shape."""
        return np.stack([np.asarray(travel_time(p, delta, x)) for p in self.profiles])

    def to_dict(self):
        return {"profiles": [p.to_dict() for p in self.profiles]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(VelocityProfile.from_dict(p) for p in d["profiles"]))


def synthetic_ensemble(n: int = 121, seed: int = 0) -> Ensemble:
    """Perturbed two-layer crust: crust vp ~ N(6.0, 0.25^2), thickness
    ~ N(35, 4^2), mantle vp ~ N(8.0, 0.15^2); non-monotone draws rejected."""
    rng = np.random.default_rng(seed)
    profiles = []
    while len(profiles) < n:
        vc = rng.normal(6.0, 0.25)
        h = rng.normal(35.0, 4.0)
        vm = rng.normal(8.0, 0.15)
        if vm <= vc or h <= 1.0:
            continue
        profiles.append(VelocityProfile(((h, vc),), vm))
    return Ensemble(tuple(profiles))


def ensemble_stats(ens: Ensemble, delta, x):
    """Sample mean and (N-1)-normalized standard deviation of member times."""
    t = ens.times(delta, x)
    return t.mean(axis=0), t.std(axis=0, ddof=1)


def _poly_exponents(degree: int):
    return [(i, k - i) for k in range(degree + 1) for i in range(k, -1, -1)]


@dataclass(frozen=True)
class SigmaSurrogate:
    """Total-degree polynomial in (distance km, depth km) for the
    earth-model travel-time standard deviation.

    Inputs are scaled to [-1, 1] over ``fit_domain`` before the monomials
    are formed.
    """

    coeffs: tuple
    fit_domain: tuple
    degree: int = 5
    sigma_floor: float = 0.05
    rms_residual: float = float("nan")

    def raw(self, delta, x):
        delta, x = np.broadcast_arrays(np.asarray(delta, float), np.asarray(x, float))
        (d0, d1), (x0, x1) = self.fit_domain
        tol = 1e-9 * max(1.0, abs(d1), abs(x1))
        if (np.any(delta < d0 - tol) or np.any(delta > d1 + tol)
                or np.any(x < x0 - tol) or np.any(x > x1 + tol)):
            raise OutOfDomainError(
                f"sigma surrogate valid on distance [{d0}, {d1}] km, depth [{x0}, {x1}] km")
        u = 2 * (delta - d0) / (d1 - d0) - 1
        w = 2 * (x - x0) / (x1 - x0) - 1
        out = np.zeros(delta.shape)
        for c, (i, j) in zip(self.coeffs, _poly_exponents(self.degree)):
            out = out + c * u**i * w**j
        return out

    def __call__(self, delta, x):
        out = np.maximum(self.raw(delta, x), self.sigma_floor)
        return out if out.ndim else float(out)

    def to_dict(self):
        return {"coeffs": list(self.coeffs), "fit_domain": [list(r) for r in self.fit_domain],
                "degree": self.degree, "sigma_floor": self.sigma_floor,
                "rms_residual": self.rms_residual}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["coeffs"]), tuple(tuple(r) for r in d["fit_domain"]),
                   int(d["degree"]), float(d["sigma_floor"]), float(d["rms_residual"]))


def fit_sigma_polynomial(delta, x, sigma, degree=5, fit_domain=None, sigma_floor=0.05):
    """Least-squares total-degree polynomial through scattered (delta, x, sigma)."""
    delta = np.ravel(np.asarray(delta, float))
    x = np.ravel(np.asarray(x, float))
    sigma = np.ravel(np.asarray(sigma, float))
    exps = _poly_exponents(degree)
    if len(set(zip(delta, x))) < len(exps):
        raise DegenerateGridError(f"need at least {len(exps)} distinct (distance, depth) points")
    if fit_domain is None:
        fit_domain = ((delta.min(), delta.max()), (x.min(), x.max()))
    (d0, d1), (x0, x1) = fit_domain
    if not (d1 > d0 and x1 > x0):
        raise DegenerateGridError("grid must span a positive range in both distance and depth")
    u = 2 * (delta - d0) / (d1 - d0) - 1
    w = 2 * (x - x0) / (x1 - x0) - 1
    A = np.stack([u**i * w**j for i, j in exps], axis=1)
    coef, _, rank, _ = np.linalg.lstsq(A, sigma, rcond=None)
    if rank < len(exps):
        raise DegenerateGridError(f"design matrix rank {rank} < {len(exps)}")
    rms = float(np.sqrt(np.mean((A @ coef - sigma) ** 2)))
    dom = ((float(d0), float(d1)), (float(x0), float(x1)))
    return SigmaSurrogate(tuple(float(c) for c in coef), dom, degree, sigma_floor, rms)


@dataclass(frozen=True)
class MeanSurrogate:
    """Tabulated mean travel time with bilinear interpolation."""

    deltas: tuple
    depths: tuple
    table: tuple

    def __post_init__(self):
        t = np.asarray(self.table, float)
        if t.shape != (len(self.deltas), len(self.depths)):
            raise InputError("table shape must be (len(deltas), len(depths))")

    @property
    def fit_domain(self):
        return (self.deltas[0], self.deltas[-1]), (self.depths[0], self.depths[-1])

    def _interp(self):
        interp = self.__dict__.get("_interp_cache")
        if interp is None:
            interp = RegularGridInterpolator(
                (np.asarray(self.deltas), np.asarray(self.depths)), np.asarray(self.table),
                method="linear", bounds_error=False, fill_value=None)
            object.__setattr__(self, "_interp_cache", interp)
        return interp

    def __call__(self, delta, x):
        delta, x = np.broadcast_arrays(np.asarray(delta, float), np.asarray(x, float))
        (d0, d1), (x0, x1) = self.fit_domain
        tol = 1e-9 * max(1.0, abs(d1), abs(x1))
        if (np.any(delta < d0 - tol) or np.any(delta > d1 + tol)
                or np.any(x < x0 - tol) or np.any(x > x1 + tol)):
            raise OutOfDomainError(
                f"mean surrogate valid on distance [{d0}, {d1}] km, depth [{x0}, {x1}] km")
        pts = np.stack([np.clip(delta, d0, d1), np.clip(x, x0, x1)], axis=-1)
        out = self._interp()(pts.reshape(-1, 2)).reshape(delta.shape)
        return out if out.ndim else float(out)

    def to_dict(self):
        return {"deltas": list(self.deltas), "depths": list(self.depths),
                "table": [list(r) for r in self.table]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["deltas"]), tuple(d["depths"]), tuple(tuple(r) for r in d["table"]))


def fit_surrogates(ens: Ensemble, deltas: Sequence[float], depths: Sequence[float],
                   degree: int = 5, sigma_floor: float = 0.05):
    """Tabulate the ensemble mean and fit the sigma polynomial on the
    rectangular grid ``deltas`` x ``depths`` (km)."""
    deltas = np.asarray(deltas, float)
    depths = np.asarray(depths, float)
    D, X = np.meshgrid(deltas, depths, indexing="ij")
    mu, sigma = ensemble_stats(ens, D, X)
    sig = fit_sigma_polynomial(D, X, sigma, degree=degree, sigma_floor=sigma_floor,
                               fit_domain=((deltas.min(), deltas.max()), (depths.min(), depths.max())))
    mean = MeanSurrogate(tuple(deltas.tolist()), tuple(depths.tolist()),
                         tuple(tuple(r) for r in mu.tolist()))
    return mean, sig


def correlation_from_times(times) -> np.ndarray:
    """Station correlation from member times of shape (N, n_stations)."""
    t = np.asarray(times, float)
    n = t.shape[0]
    dev = t - t.mean(axis=0)
    sd = t.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise UndefinedCorrelationError("zero travel-time spread at a station")
    return dev.T @ dev / ((n - 1) * np.outer(sd, sd))


def empirical_correlation(ens: Ensemble, deltas, depths) -> np.ndarray:
    """Depth-averaged ensemble correlation between stations at epicentral
    distances ``deltas`` (km)."""
    deltas = np.asarray(deltas, float)
    gamma = np.zeros((deltas.size, deltas.size))
    for x in depths:
        gamma += correlation_from_times(ens.times(deltas, float(x)))
    gamma /= len(depths)
    gamma = 0.5 * (gamma + gamma.T)
    np.fill_diagonal(gamma, 1.0)
    return gamma


@dataclass(frozen=True)
class CorrelationModel:
    """Squared-exponential station correlation.

    ``epicentral-difference`` feeds the kernel the difference of
    source-station distances, ``station-separation`` the distance between
    the two stations, and ``independent`` gives the identity.
    """

    length_scale: float = 147.5
    mode: str = "epicentral-difference"

    def __post_init__(self):
        if not self.length_scale > 0:
            raise InputError("length scale must be positive")
        if self.mode not in CORRELATION_MODES:
            raise InputError(f"unknown correlation mode {self.mode!r}")

    def to_dict(self):
        return {"length_scale": self.length_scale, "mode": self.mode}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["length_scale"]), d.get("mode", "epicentral-difference"))


def kernel_correlation(model: CorrelationModel, delta_j, delta_k):
    d = np.asarray(delta_j, float) - np.asarray(delta_k, float)
    out = np.exp(-0.5 * d**2 / model.length_scale**2)
    return out if out.ndim else float(out)


def _golden_section(f, a, b, tol=1e-10, maxiter=200):
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if b - a < tol:
            break
        # ties keep the lower bracket
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def fit_kernel_length(gamma, deltas, lower: float = 1.0, upper: float = 1e4,
                      mode: str = "epicentral-difference") -> CorrelationModel:
    """Length scale (km) minimizing the Frobenius misfit to ``gamma``,
    by golden-section search on log length scale."""
    gamma = np.asarray(gamma, float)
    if not np.all(np.isfinite(gamma)):
        raise InputError("correlation matrix has non-finite entries")
    deltas = np.asarray(deltas, float)
    d2 = (deltas[:, None] - deltas[None, :]) ** 2

    def objective(log_l):
        return np.linalg.norm(gamma - np.exp(-0.5 * d2 / math.exp(log_l) ** 2))

    log_l = _golden_section(objective, math.log(lower), math.log(upper))
    return CorrelationModel(math.exp(log_l), mode)


def kernel_objective(gamma, deltas, length_scale):
    deltas = np.asarray(deltas, float)
    d2 = (deltas[:, None] - deltas[None, :]) ** 2
    return float(np.linalg.norm(np.asarray(gamma) - np.exp(-0.5 * d2 / length_scale**2)))
