"""Expected information gain on a discrete event grid.

The weighted event set plays three roles at once: prior sample, the loop
over true events, and the support of every posterior. Station terms are
computed once per (support, network) and reused for every dataset.
"""

from __future__ import annotations

import json
import math
import os
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_expit, logsumexp

from ._errors import AbsoluteContinuityError, ZeroPosteriorMassError
from .arrivals import LOG_2PI, cholesky
from .priors import Event, WeightedEventSet, events_to_array
from .synth import random_block, simulate_from_terms

SENSITIVITY_HEADER = ["lat", "lon", "depth_km", "mag", "eig_nats", "mc_se_nats"]


def default_threads() -> int:
    env = os.environ.get("NETOED_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class DiscreteDistribution:
    support: WeightedEventSet
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("probabilities must be non-negative and sum to 1")
        self.probs = p

    @classmethod
    def prior(cls, support: WeightedEventSet) -> "DiscreteDistribution":
        return cls(support, support.weights)


@dataclass(frozen=True)
class SensitivityRecord:
    event: Event
    eig: float
    mc_std_error: float
    n_realizations: int


@dataclass
class EigReport:
    total_eig: float
    records: list
    settings: dict = field(default_factory=dict)
    total_std_error: float = 0.0
    n_zero_mass: int = 0
    n_concentrated: int = 0
    weights: np.ndarray = None

    def to_dict(self) -> dict:
        return {
            "total_eig_nats": self.total_eig,
            "total_mc_se_nats": self.total_std_error,
            "n_events": len(self.records),
            "n_zero_posterior_mass": self.n_zero_mass,
            "n_concentrated_posteriors": self.n_concentrated,
            "settings": self.settings,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


class LikelihoodTable:
    """Log-likelihood of datasets against every support event for a fixed
    network and bundle."""

    def __init__(self, support: WeightedEventSet, net, bundle, use_arrivals: bool = True):
        self.support = support
        self.net = net
        self.bundle = bundle
        self.use_arrivals = use_arrivals
        self.terms = bundle.station_terms(support.coords, net)
        self.cov = self.terms.covariance(bundle.nugget)
        self.log_p = log_expit(self.terms.logit)
        self.log_q = log_expit(-self.terms.logit)
        self._det_w = (self.log_p - self.log_q).T
        self._det_c = self.log_q.sum(axis=1)
        self._patterns = {}
        self._lock = threading.Lock()

    def _pattern_terms(self, idx):
        key = idx.tobytes()
        with self._lock:
            hit = self._patterns.get(key)
        if hit is not None:
            return hit
        d = idx.size
        cov = self.cov[:, idx[:, None], idx[None, :]]
        L = cholesky(cov)
        eye = np.broadcast_to(np.eye(d), cov.shape)
        Linv = np.linalg.solve(L, eye)
        inv = np.einsum("kji,kjl->kil", Linv, Linv)
        v = inv.sum(axis=2)
        beta = v.sum(axis=1)
        proj = inv - v[:, :, None] * v[:, None, :] / beta[:, None, None]
        logdet = 2 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
        const = -0.5 * ((d - 1) * LOG_2PI + logdet + np.log(beta))
        out = (proj, const, self.terms.mu[:, idx])
        with self._lock:
            self._patterns[key] = out
        return out

    def loglik(self, det, arr) -> np.ndarray:
        """(M, K) log-likelihoods for detections ``det`` (M, n) and padded
        arrivals ``arr`` (M, n)."""
        det = np.asarray(det, bool)
        M = det.shape[0]
        ll = det.astype(float) @ self._det_w + self._det_c[None, :] if det.shape[1] \
            else np.zeros((M, len(self.support)))
        if not self.use_arrivals or det.shape[1] == 0:
            return ll
        patterns, inverse = np.unique(det, axis=0, return_inverse=True)
        inverse = np.ravel(inverse)
        for p_i, pat in enumerate(patterns):
            idx = np.flatnonzero(pat)
            if idx.size < 2:
                continue
            rows = np.flatnonzero(inverse == p_i)
            proj, const, mu = self._pattern_terms(idx)
            r = arr[rows][:, idx][:, None, :] - mu[None, :, :]
            r = r - r.mean(axis=2, keepdims=True)
            quad = np.einsum("mki,kij,mkj->mk", r, proj, r)
            ll[rows] += const[None, :] - 0.5 * quad
        return ll


def _posterior_log(log_prior, ll):
    lp = log_prior[None, :] + ll
    norm = logsumexp(lp, axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        return lp - norm, np.isfinite(norm[:, 0])


def _kl_rows(log_post, log_prior):
    post = np.exp(log_post)
    with np.errstate(invalid="ignore"):
        terms = np.where(post > 0, post * (log_post - log_prior[None, :]), 0.0)
    return terms.sum(axis=1)


def posterior_weights(ds, support: WeightedEventSet, net, bundle, use_arrivals=True,
                      table: LikelihoodTable | None = None) -> DiscreteDistribution:
    """Posterior over the support events given one dataset."""
    table = table or LikelihoodTable(support, net, bundle, use_arrivals)
    det = np.asarray(ds.detections, bool)[None, :]
    arr = np.full(det.shape, np.nan)
    arr[0, det[0]] = ds.arrivals
    log_post, ok = _posterior_log(support.log_weights, table.loglik(det, arr))
    if not ok[0]:
        raise ZeroPosteriorMassError("all support events have zero posterior mass")
    return DiscreteDistribution(support, np.exp(log_post[0]))


def posterior_from_loglik(support: WeightedEventSet, loglik) -> DiscreteDistribution:
    """Posterior from externally supplied per-event log-likelihoods."""
    log_post, ok = _posterior_log(support.log_weights, np.asarray(loglik, float)[None, :])
    if not ok[0]:
        raise ZeroPosteriorMassError("all support events have zero posterior mass")
    return DiscreteDistribution(support, np.exp(log_post[0]))


def kl_divergence(post, prior) -> float:
    """KL(post || prior) in nats with 0 log 0 = 0."""
    p = np.asarray(getattr(post, "probs", post), float)
    q = np.asarray(getattr(prior, "probs", prior), float)
    if p.shape != q.shape:
        raise ValueError("distributions must share a support")
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise AbsoluteContinuityError("posterior mass on zero-prior support")
    return float(max(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))), 0.0))


def _event_kls(table: LikelihoodTable, theta_terms, event_indices, n_realizations, seed):
    """Per-dataset KL values, shape (len(event_indices), R), plus counts of
    zero-mass and concentrated posteriors."""
    n = len(table.net)
    E = len(event_indices)
    u, z = random_block(seed, event_indices, n_realizations, n)
    dets = np.empty((E, n_realizations, n), dtype=bool)
    arrs = np.empty((E, n_realizations, n))
    logit, mu, cov = theta_terms
    for i in range(E):
        dets[i], arrs[i] = simulate_from_terms(logit[i], mu[i], cov[i], u[i], z[i])
    ll = table.loglik(dets.reshape(E * n_realizations, n), arrs.reshape(E * n_realizations, n))
    log_prior = table.support.log_weights
    log_post, ok = _posterior_log(log_prior, ll)
    kl = _kl_rows(np.where(ok[:, None], log_post, -np.inf), log_prior)
    kl = np.where(ok, np.maximum(kl, 0.0), np.nan)
    concentrated = int(np.sum(np.exp(log_post[ok].max(axis=1)) > 0.5)) if ok.any() else 0
    return kl.reshape(E, n_realizations), int(np.sum(~ok)), concentrated


def _summarize(event, kls, n_realizations):
    good = kls[np.isfinite(kls)]
    if good.size == 0:
        return SensitivityRecord(event, float("nan"), float("nan"), 0)
    se = float(good.std(ddof=1) / math.sqrt(good.size)) if good.size > 1 else 0.0
    return SensitivityRecord(event, float(good.mean()), se, int(good.size))


def eig_event(theta_prime: Event, support: WeightedEventSet, net, bundle, n_realizations: int = 32,
              seed: int = 0, event_index: int = 0, use_arrivals: bool = True,
              table: LikelihoodTable | None = None) -> SensitivityRecord:
    """Expected information gain about one event: mean KL over datasets
    simulated from ``theta_prime``."""
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    table = table or LikelihoodTable(support, net, bundle, use_arrivals)
    t = bundle.station_terms(events_to_array(theta_prime), net)
    theta_terms = (t.logit, t.mu, t.covariance(bundle.nugget))
    kls, n_zero, _ = _event_kls(table, theta_terms, [event_index], n_realizations, seed)
    if n_zero:
        warnings.warn(f"{n_zero} datasets had zero posterior mass and were skipped")
    return _summarize(theta_prime, kls[0], n_realizations)


def eig_total(support: WeightedEventSet, net, bundle, n_realizations: int = 32, seed: int = 0,
              use_arrivals: bool = True, threads: int | None = None,
              chunk_size: int = 32) -> EigReport:
    """Importance-weighted average of per-event EIG over the support.

    Work is split into fixed chunks of ``chunk_size`` events whose random
    streams are keyed by event index, so the result does not depend on
    ``threads``.
    """
    if len(support) == 0:
        raise ValueError("support must be non-empty")
    threads = default_threads() if threads is None else max(1, int(threads))
    table = LikelihoodTable(support, net, bundle, use_arrivals)
    logit, mu, cov = table.terms.logit, table.terms.mu, table.cov
    chunks = [np.arange(s, min(s + chunk_size, len(support)))
              for s in range(0, len(support), chunk_size)]

    def work(idx):
        return _event_kls(table, (logit[idx], mu[idx], cov[idx]), idx, n_realizations, seed)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]

    kls = np.concatenate([r[0] for r in results], axis=0)
    n_zero = sum(r[1] for r in results)
    n_conc = sum(r[2] for r in results)
    records = [_summarize(support[k], kls[k], n_realizations) for k in range(len(support))]
    w = support.weights
    eigs = np.array([r.eig for r in records])
    ses = np.array([r.mc_std_error for r in records])
    valid = np.isfinite(eigs)
    wv = w[valid] / w[valid].sum()
    total = float(np.dot(wv, eigs[valid]))
    total_se = float(np.sqrt(np.dot(wv**2, ses[valid] ** 2)))
    n_datasets = kls.size
    if n_zero > 0.01 * n_datasets:
        warnings.warn(f"{n_zero} of {n_datasets} datasets had zero posterior mass")
    settings = {
        "n_events": len(support),
        "n_realizations": n_realizations,
        "seed": seed,
        "n_stations": len(net),
        "use_arrivals": use_arrivals,
    }
    return EigReport(total, records, settings, total_se, n_zero, n_conc, w)


def sensitivity_map(report: EigReport) -> list:
    """One (lat, lon, depth_km, mag, eig_nats, mc_se_nats) row per event."""
    return [(r.event.lat, r.event.lon, r.event.depth, r.event.mag, r.eig, r.mc_std_error)
            for r in report.records]


def aggregate_rows(rows, weights) -> float:
    eig = np.array([r[4] for r in rows])
    w = np.asarray(weights, float)
    ok = np.isfinite(eig)
    return float(np.dot(w[ok] / w[ok].sum(), eig[ok]))


def write_sensitivity_csv(path, rows, header_comment: str | None = None):
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(SENSITIVITY_HEADER) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_sensitivity_csv(path) -> list:
    rows = []
    with open(path) as fh:
        lines = [l for l in fh if not l.startswith("#")]
    if lines[0].strip().split(",") != SENSITIVITY_HEADER:
        raise ValueError(f"{path}: unexpected header")
    for line in lines[1:]:
        rows.append(tuple(float(v) for v in line.strip().split(",")))
    return rows
