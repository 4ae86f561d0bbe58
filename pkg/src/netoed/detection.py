"""Logistic phase-detection model and its weighted maximum-likelihood fit."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.special import expit, log_expit

from ._errors import DimensionError, InputError, SeparableDataError
from .geo import central_angle

# Transportable Array fit: distance (per degree), depth (per km), magnitude, intercept
DEFAULT_COEFFICIENTS = (-2.82, -0.03, 1.14, 1.95)


@dataclass(frozen=True)
class DetectionModel:
    alpha: float = DEFAULT_COEFFICIENTS[0]
    beta: float = DEFAULT_COEFFICIENTS[1]
    gamma_m: float = DEFAULT_COEFFICIENTS[2]
    delta0: float = DEFAULT_COEFFICIENTS[3]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.coefficients):
            raise InputError("detection coefficients must be finite")

    @property
    def coefficients(self) -> tuple:
        return (self.alpha, self.beta, self.gamma_m, self.delta0)

    def logit(self, dist_deg, depth, mag):
        return self.alpha * np.asarray(dist_deg) + self.beta * np.asarray(depth) \
            + self.gamma_m * np.asarray(mag) + self.delta0

    def to_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "gamma_m": self.gamma_m, "delta0": self.delta0}

    @classmethod
    def from_dict(cls, d):
        return cls(*(float(d[k]) for k in ("alpha", "beta", "gamma_m", "delta0")))


def detection_probability(m: DetectionModel, e, s):
    """Probability that a station at ``s`` detects the first P of ``e``.

    ``s`` may be a GeoPoint or a SensorNetwork, in which case an array over
    stations is returned.
    """
    if hasattr(s, "lats"):
        dist = central_angle(e.lat, e.lon, s.lats, s.lons)
        return expit(m.logit(dist, e.depth, e.mag))
    dist = central_angle(e.lat, e.lon, s.lat, s.lon)
    return float(expit(m.logit(dist, e.depth, e.mag)))


def bernoulli_loglik(logit, detected):
    """Sum of Bernoulli log-probabilities given logits, computed stably."""
    logit = np.asarray(logit, float)
    d = np.asarray(detected, bool)
    return np.sum(np.where(d, log_expit(logit), log_expit(-logit)), axis=-1)


def detection_loglik(m: DetectionModel, d, e, net) -> float:
    """Log-probability of a detection vector under conditional independence."""
    d = np.asarray(d, bool)
    if d.shape != (len(net),):
        raise DimensionError(f"detection vector length {d.size} != network size {len(net)}")
    dist = central_angle(e.lat, e.lon, net.lats, net.lons)
    return float(bernoulli_loglik(m.logit(dist, e.depth, e.mag), d))


@dataclass(frozen=True)
class CatalogRow:
    dist_deg: float
    depth: float
    mag: Optional[float]
    mag_missing: int
    detected: bool

    def __post_init__(self):
        if not self.dist_deg >= 0:
            raise InputError("dist_deg must be >= 0")
        if (self.mag is None) != bool(self.mag_missing):
            raise InputError("mag must be present iff mag_missing == 0")


def read_catalog(path) -> list:
    """Read ``dist_deg,depth_km,mag,mag_missing,detected`` rows."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        need = {"dist_deg", "depth_km", "mag", "mag_missing", "detected"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InputError(f"{path}: catalog header must contain {sorted(need)}")
        for r in reader:
            missing = int(r["mag_missing"])
            mag = None if missing else float(r["mag"])
            rows.append(CatalogRow(float(r["dist_deg"]), float(r["depth_km"]), mag, missing,
                                   bool(int(r["detected"]))))
    return rows


def write_catalog(path, rows: Iterable[CatalogRow]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dist_deg", "depth_km", "mag", "mag_missing", "detected"])
        for r in rows:
            w.writerow([repr(r.dist_deg), repr(r.depth), "" if r.mag is None else repr(r.mag),
                        r.mag_missing, int(r.detected)])


def _design(rows):
    X = np.empty((len(rows), 5))
    y = np.empty(len(rows))
    for i, r in enumerate(rows):
        X[i] = (r.dist_deg, r.depth, 0.0 if r.mag_missing else r.mag, r.mag_missing, 1.0)
        y[i] = r.detected
    return X, y


def weighted_bce(w, X, y, detection_weight=1.0):
    """Weighted binary cross entropy (sum over rows) and its gradient."""
    z = X @ w
    sw = np.where(y > 0, detection_weight, 1.0)
    loss = -np.sum(sw * np.where(y > 0, log_expit(z), log_expit(-z)))
    grad = X.T @ (sw * (expit(z) - y))
    return loss, grad


def fit_detection_model(rows, detection_weight: float = 2.0, max_iter: int = 100,
                        clamp: float = 1e3, return_info: bool = False):
    """Newton iteration on the weighted cross entropy.

    Features are distance (deg), depth (km), magnitude, a magnitude-missing
    indicator and an intercept. Positives are weighted by
    ``detection_weight``. The indicator coefficient is dropped from the
    returned model.
    """
    X, y = _design(rows)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise SeparableDataError("need at least one detected and one undetected row",
                                 coefficients=None)
    cols = [j for j in range(5) if j == 4 or np.any(X[:, j] != 0)]
    Xs = X[:, cols]
    w = np.zeros(len(cols))
    sw = np.where(y > 0, detection_weight, 1.0)
    converged = False
    loss, grad = weighted_bce(w, Xs, y, detection_weight)
    for it in range(max_iter):
        p = expit(Xs @ w)
        H = (Xs * (sw * p * (1 - p))[:, None]).T @ Xs
        step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while True:
            w_new = w - t * step
            loss_new, grad_new = weighted_bce(w_new, Xs, y, detection_weight)
            if loss_new <= loss + 1e-4 * t * (grad @ -step) or t < 1e-10:
                break
            t *= 0.5
        w, loss, grad = w_new, loss_new, grad_new
        if np.max(np.abs(w)) > clamp:
            full = np.zeros(5)
            full[cols] = np.clip(w, -clamp, clamp)
            raise SeparableDataError("coefficients diverged: data look separable",
                                     coefficients=full)
        if np.linalg.norm(grad) < 1e-8 * max(1.0, len(y) / 1000):
            converged = True
            break
    full = np.zeros(5)
    full[cols] = w
    # every row on the correct side of the fitted boundary: the MLE does not
    # exist and the iterates only crept towards infinity
    if np.all((2 * y - 1) * (Xs @ w) > 0):
        raise SeparableDataError("data are linearly separable; coefficients not identifiable",
                                 coefficients=np.clip(full, -clamp, clamp))
    model = DetectionModel(full[0], full[1], full[2], full[4])
    if return_info:
        return model, {"iterations": it + 1, "converged": converged, "mag_missing_coef": full[3],
                       "grad_norm": float(np.linalg.norm(grad)), "loss": float(loss)}
    return model


def synthetic_catalog(n: int, model: DetectionModel, seed: int, max_dist: float = 4.0,
                      depth_range=(0.0, 40.0), mag_min: float = 0.5, mag_rate: float = math.log(10.0),
                      missing_rate: float = 0.0):
    """Catalog rows drawn from ``model``; distances uniform on [0, max_dist]."""
    rng = np.random.default_rng(seed)
    dist = rng.uniform(0.0, max_dist, n)
    depth = rng.uniform(*depth_range, n)
    mag = mag_min + rng.exponential(1.0 / mag_rate, n)
    det = rng.uniform(size=n) < expit(model.logit(dist, depth, mag))
    missing = rng.uniform(size=n) < missing_rate
    return [CatalogRow(float(a), float(b), None if mi else float(c), int(mi), bool(d))
            for a, b, c, d, mi in zip(dist, depth, mag, det, missing)]


def classification_metrics(model: DetectionModel, rows, threshold: float = 0.5) -> dict:
    X, y = _design(rows)
    p = expit(model.logit(X[:, 0], X[:, 1], X[:, 2]))
    pred = p >= threshold
    tp = np.sum(pred & (y > 0))
    fp = np.sum(pred & (y == 0))
    fn = np.sum(~pred & (y > 0))
    return {
        "accuracy": float(np.mean(pred == (y > 0))),
        "precision": float(tp / max(tp + fp, 1)),
        "recall": float(tp / max(tp + fn, 1)),
    }
