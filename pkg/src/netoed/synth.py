"""Hypothetical datasets (detections and arrival times) for a candidate event.

Every (seed, event index, replicate) triple owns two independent random
streams, one for detections and one for pick noise, so results do not
depend on evaluation order or on how work is split between workers.
Origin time is fixed at zero: the marginal likelihood is invariant to a
common shift of all arrivals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from ._errors import SingularCovarianceError


@dataclass(frozen=True)
class SyntheticDataset:
    detections: np.ndarray
    arrivals: np.ndarray
    origin_time_used: float = 0.0

    def __post_init__(self):
        if self.arrivals.shape != (int(np.sum(self.detections)),):
            raise ValueError("arrivals length must equal the detection count")


def replicate_rngs(seed: int, event_index: int, replicate: int):
    """(detection rng, pick-noise rng) for one replicate."""
    key = (int(event_index), int(replicate))
    det = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key + (0,))))
    arr = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key + (1,))))
    return det, arr


def random_block(seed: int, event_indices, n_realizations: int, n_stations: int):
    """Uniforms and standard normals of shape (events, replicates, stations).

    A prefix of a longer block equals the shorter block, so appending a
    station leaves the draws of existing stations untouched.
    """
    event_indices = np.atleast_1d(event_indices)
    u = np.empty((event_indices.size, n_realizations, n_stations))
    z = np.empty_like(u)
    for i, ev in enumerate(event_indices):
        for r in range(n_realizations):
            rd, ra = replicate_rngs(seed, int(ev), r)
            u[i, r] = rd.random(n_stations)
            z[i, r] = ra.standard_normal(n_stations)
    return u, z


def sample_mvn(cov, z):
    """Map standard normals ``z`` through a triangular factor of ``cov``.

    Positive semidefinite (singular) matrices are factored with a pivoted
    LDL^T so degenerate directions are reproduced exactly.
    """
    cov = np.asarray(cov, float)
    z = np.asarray(z, float)
    scale = max(np.abs(np.diag(cov)).max(), 1e-300)
    tiny = 1e-12 * scale
    try:
        L = np.linalg.cholesky(cov)
        # pivots at rounding level: the matrix is singular in exact arithmetic
        if np.min(np.diag(L)) ** 2 <= tiny:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        lu, dmat, _ = scipy.linalg.ldl(cov, lower=True)
        dvals = np.diag(dmat)
        if not np.allclose(dmat, np.diag(dvals)) or dvals.min() < -1e-10 * scale:
            raise SingularCovarianceError("covariance is not positive semidefinite")
        L = lu * np.sqrt(np.where(dvals <= tiny, 0.0, dvals))[None, :]
    return z @ L.T


def simulate_from_terms(logit, mu, cov, u, z):
    """Datasets for one event from its station terms.

    ``logit``, ``mu``: (n,); ``cov``: (n, n); ``u``, ``z``: (R, n).
    Returns detections (R, n) bool and arrivals (R, n) with NaN where no
    detection occurred.
    """
    det = u < expit(logit)[None, :]
    arr = np.full(u.shape, np.nan)
    for r in range(u.shape[0]):
        idx = np.flatnonzero(det[r])
        if idx.size:
            arr[r, idx] = mu[idx] + sample_mvn(cov[np.ix_(idx, idx)], z[r, : idx.size])
    return det, arr


def sample_detections(e, net, dm, rng) -> np.ndarray:
    """Independent Bernoulli detections per station."""
    from .detection import detection_probability

    p = detection_probability(dm, e, net)
    return rng.random(len(net)) < p


def sample_arrivals(e, d, net, bundle, rng, nugget=None) -> np.ndarray:
    """Arrival times (origin time 0) for the detecting stations."""
    d = np.asarray(d, bool)
    idx = np.flatnonzero(d)
    if idx.size == 0:
        return np.zeros(0)
    terms = bundle.station_terms(e, net)
    cov = terms.covariance(bundle.nugget if nugget is None else nugget)[0][np.ix_(idx, idx)]
    return terms.mu[0, idx] + sample_mvn(cov, rng.standard_normal(idx.size))


def synth_dataset(e, net, bundle, n_realizations: int = 32, seed: int = 0, event_index: int = 0):
    """``n_realizations`` datasets for event ``e``; replicate k is a pure
    function of (seed, event_index, k)."""
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    terms = bundle.station_terms(e, net)
    u, z = random_block(seed, event_index, n_realizations, len(net))
    det, arr = simulate_from_terms(terms.logit[0], terms.mu[0],
                                   terms.covariance(bundle.nugget)[0], u[0], z[0])
    return [SyntheticDataset(det[r].copy(), arr[r, det[r]].copy()) for r in range(n_realizations)]


def write_datasets_csv(path_or_fh, datasets, header_comment: str | None = None):
    """Rows ``replicate,station_idx,detected,arrival_s``; empty arrival when
    not detected."""
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "station_idx", "detected", "arrival_s"])
        for r, ds in enumerate(datasets):
            arrivals = iter(ds.arrivals)
            for i, flag in enumerate(ds.detections):
                w.writerow([r, i, int(flag), repr(float(next(arrivals))) if flag else ""])
    finally:
        if own:
            fh.close()
