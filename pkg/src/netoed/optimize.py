"""Greedy sensor placement by Bayesian optimization over (lat, lon)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from ._errors import InfeasibleRegionError, InputError
from .eig import eig_total
from .geo import region_bounds, region_contains, sobol_unit

NOISE_FLOOR = 1e-8
_LOG_BOUNDS = [(math.log(1e-3), math.log(1e2))] * 2 + [
    (math.log(1e-4), math.log(1e2)),
    (math.log(NOISE_FLOOR), math.log(1e1)),
]


@dataclass
class GpSurrogate:
    """Squared-exponential GP with per-axis length scales.

    Inputs are (lat, lon) mapped to the unit square over ``bounds``;
    outputs are standardized. ``length_scales`` are in unit-square
    coordinates, ``signal_var`` and ``noise_var`` in standardized units.
    """

    train_points: np.ndarray
    train_values: np.ndarray
    bounds: tuple
    length_scales: np.ndarray
    signal_var: float
    noise_var: float
    y_mean: float
    y_scale: float
    _chol: np.ndarray = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)

    def unit(self, pts):
        lat0, lat1, lon0, lon1 = self.bounds
        pts = np.atleast_2d(np.asarray(pts, float))
        return np.column_stack([(pts[:, 0] - lat0) / (lat1 - lat0), (pts[:, 1] - lon0) / (lon1 - lon0)])

    @property
    def length_scales_deg(self) -> np.ndarray:
        lat0, lat1, lon0, lon1 = self.bounds
        return self.length_scales * np.array([lat1 - lat0, lon1 - lon0])


def _se_kernel(A, B, ls, sf2):
    d = (A[:, None, :] - B[None, :, :]) / ls
    return sf2 * np.exp(-0.5 * np.sum(d * d, axis=-1))


def _nll_and_grad(log_theta, X, y):
    ls = np.exp(log_theta[:2])
    sf2 = math.exp(log_theta[2])
    sn2 = math.exp(log_theta[3])
    n = len(y)
    diff2 = (X[:, None, :] - X[None, :, :]) ** 2
    Kf = sf2 * np.exp(-0.5 * np.sum(diff2 / ls**2, axis=-1))
    K = Kf + (sn2 + 1e-10) * np.eye(n)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return 1e25, np.zeros(4)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))
    nll = 0.5 * y @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * math.log(2 * math.pi)
    Kinv = np.linalg.solve(L.T, np.linalg.solve(L, np.eye(n)))
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty(4)
    for d in range(2):
        grad[d] = -0.5 * np.sum(W * Kf * diff2[:, :, d] / ls[d] ** 2)
    grad[2] = -0.5 * np.sum(W * Kf)
    grad[3] = -0.5 * sn2 * np.trace(W)
    return nll, grad


def gp_fit(points, values, bounds=None, n_restarts: int = 8, seed: int = 0) -> GpSurrogate:
    """Fit hyperparameters by maximizing the log marginal likelihood from
    ``n_restarts`` deterministic starting points (L-BFGS-B, log scale).

    ``bounds`` = (lat_min, lat_max, lon_min, lon_max) defines the unit
    square; defaults to the bounding box of ``points``.
    """
    P = np.atleast_2d(np.asarray(points, float))
    v = np.asarray(values, float)
    if P.shape[0] < 2:
        raise InputError("gp_fit needs at least 2 points")
    if bounds is None:
        lo, hi = P.min(axis=0), P.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        bounds = (lo[0], hi[0], lo[1], hi[1])
    y_mean = float(v.mean())
    y_scale = float(v.std())
    if not y_scale > 0:
        y_scale = 1.0
    y = (v - y_mean) / y_scale
    gp = GpSurrogate(P, v, tuple(float(b) for b in bounds), None, 0.0, 0.0, y_mean, y_scale)
    X = gp.unit(P)

    rng = np.random.default_rng(seed)
    starts = [np.array([math.log(0.3), math.log(0.3), 0.0, math.log(1e-2)])]
    for _ in range(n_restarts - 1):
        starts.append(np.array([rng.uniform(lo, hi) for lo, hi in _LOG_BOUNDS]))
    best = None
    for x0 in starts:
        res = minimize(_nll_and_grad, x0, args=(X, y), jac=True, method="L-BFGS-B", bounds=_LOG_BOUNDS)
        if best is None or res.fun < best.fun:
            best = res
    th = best.x
    gp.length_scales = np.exp(th[:2])
    gp.signal_var = float(math.exp(th[2]))
    gp.noise_var = float(max(math.exp(th[3]), NOISE_FLOOR))
    K = _se_kernel(X, X, gp.length_scales, gp.signal_var) + (gp.noise_var + 1e-10) * np.eye(len(y))
    gp._chol = np.linalg.cholesky(K)
    gp._alpha = np.linalg.solve(gp._chol.T, np.linalg.solve(gp._chol, y))
    return gp


def gp_predict(s: GpSurrogate, p):
    """Posterior mean and (latent) standard deviation at one or more
    (lat, lon) points, in the units of the training values."""
    single = np.ndim(p) == 1
    Xs = s.unit(p)
    ks = _se_kernel(Xs, s.unit(s.train_points), s.length_scales, s.signal_var)
    mean = s.y_mean + s.y_scale * (ks @ s._alpha)
    v = np.linalg.solve(s._chol, ks.T)
    var = np.clip(s.signal_var - np.sum(v * v, axis=0), 0.0, None)
    std = s.y_scale * np.sqrt(var)
    if single:
        return float(mean[0]), float(std[0])
    return mean, std


def expected_improvement(mean, std, best_so_far):
    """EI for maximization; reduces to max(mean - best, 0) where std = 0."""
    mean = np.asarray(mean, float)
    std = np.asarray(std, float)
    imp = mean - best_so_far
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, imp / np.where(std > 0, std, 1.0), 0.0)
        ei = np.where(std > 0, std * (norm.pdf(z) + z * norm.cdf(z)), np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return ei if ei.ndim else float(ei)


def _acquisition(kind, mean, std, best):
    if kind == "ei":
        return expected_improvement(mean, std, best)
    if kind == "lcb":
        # confidence bound for maximization
        return mean + 1.96 * std
    if kind == "pi":
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(std > 0, norm.cdf((mean - best) / np.where(std > 0, std, 1.0)),
                            (mean > best).astype(float))
    raise InputError(f"unknown acquisition {kind!r}")


def _feasible(region, within, lat, lon) -> np.ndarray:
    ok = np.asarray(region_contains(region, lat, lon), bool)
    if within is not None:
        ok &= np.asarray(region_contains(within, lat, lon), bool)
    return ok


def feasible_candidates(region, n: int, seed: int, within=None) -> np.ndarray:
    """Scrambled Sobol points over the region's bounding box that satisfy
    the region constraint (and lie inside ``within`` if given), as
    (lat, lon) rows."""
    lat0, lat1, lon0, lon1 = region_bounds(region)
    u = sobol_unit(n, 2, seed)
    pts = np.column_stack([lat0 + u[:, 0] * (lat1 - lat0), lon0 + u[:, 1] * (lon1 - lon0)])
    return pts[_feasible(region, within, pts[:, 0], pts[:, 1])]


def propose_next(s: GpSurrogate, region, rng, n_candidates: int = 2048, n_refine: int = 20,
                 acquisition: str = "ei", within=None):
    """Maximize the acquisition over feasible QMC candidates, then polish
    with a compass pattern search that never leaves the region."""
    cand = feasible_candidates(region, n_candidates, int(rng.integers(2**31)), within)
    if cand.shape[0] == 0:
        raise InfeasibleRegionError("no feasible candidate points in region")
    best_val = float(np.max(s.train_values))
    mean, std = gp_predict(s, cand)
    acq = _acquisition(acquisition, mean, std, best_val)
    if acquisition == "ei" and not np.max(acq) > 1e-12 * max(1.0, abs(best_val)):
        i = int(np.argmax(std))
        return float(cand[i, 0]), float(cand[i, 1])
    i = int(np.argmax(acq))
    x = cand[i].copy()
    fx = float(acq[i])
    lat0, lat1, lon0, lon1 = region_bounds(region)
    step = np.array([lat1 - lat0, lon1 - lon0]) / 64.0
    moves = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    for _ in range(n_refine):
        trial = x[None, :] + moves * step[None, :]
        ok = _feasible(region, within, trial[:, 0], trial[:, 1])
        if ok.any():
            m, sd = gp_predict(s, trial[ok])
            a = _acquisition(acquisition, m, sd, best_val)
            j = int(np.argmax(a))
            if a[j] > fx:
                x, fx = trial[ok][j], float(a[j])
                continue
        step = step / 2
    return float(x[0]), float(x[1])


@dataclass
class TraceRecord:
    sensor_idx: int
    lat: float
    lon: float
    eig_total: float
    eig_se: float
    n_evaluations: int


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def write_csv(self, path, header_comment: str | None = None):
        """Every evaluation as ``sensor_idx,iter,lat,lon,eig_nats``."""
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sensor_idx", "iter", "lat", "lon", "eig_nats"])
            for row in self.evaluations:
                w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4])])


def greedy_place(initial, k: int, region, support, bundle, budget: int = 100, seed: int = 0,
                 n_realizations: int = 32, snr_offset: float = 0.0, n_init: int = 10,
                 use_arrivals: bool = True, threads=None, acquisition: str = "ei",
                 callback=None, within=None):
    """Add ``k`` sensors one at a time.

    Each addition evaluates ``n_init`` QMC locations, then alternates GP
    refits and acquisition proposals until ``budget`` evaluations are
    spent, and commits the best location actually evaluated. All EIG
    evaluations share ``seed`` (common random numbers). Candidates must
    satisfy ``region`` and, if given, lie inside ``within`` (typically the
    sensor domain).
    """
    if k < 0:
        raise InputError("k must be >= 0")
    if k and budget < n_init:
        raise InputError(f"budget must be >= {n_init}")
    net = initial
    trace = OptimizationTrace()
    bounds = region_bounds(region)

    def evaluate(lat, lon):
        rep = eig_total(support, net.add(lat, lon, snr_offset), bundle, n_realizations, seed,
                        use_arrivals=use_arrivals, threads=threads)
        return rep.total_eig, rep.total_std_error

    for s_idx in range(k):
        cand = feasible_candidates(region, 2048, seed * 7919 + s_idx, within)
        if cand.shape[0] == 0:
            raise InfeasibleRegionError("no feasible candidate points in region")
        pts, vals, ses = [], [], []
        for it in range(min(n_init, budget)):
            lat, lon = cand[it % cand.shape[0]]
            val, se = evaluate(lat, lon)
            pts.append((float(lat), float(lon)))
            vals.append(val)
            ses.append(se)
            trace.evaluations.append((s_idx, it, float(lat), float(lon), val))
        rng = np.random.default_rng([seed, s_idx])
        for it in range(len(pts), budget):
            gp = gp_fit(pts, vals, bounds=bounds, seed=seed + it)
            lat, lon = propose_next(gp, region, rng, acquisition=acquisition, within=within)
            val, se = evaluate(lat, lon)
            pts.append((lat, lon))
            vals.append(val)
            ses.append(se)
            trace.evaluations.append((s_idx, it, lat, lon, val))
        j = int(np.argmax(vals))
        net = net.add(pts[j][0], pts[j][1], snr_offset)
        rec = TraceRecord(s_idx, pts[j][0], pts[j][1], vals[j], ses[j], len(pts))
        trace.records.append(rec)
        if callback is not None:
            callback(rec)
    return net, trace
