"""Pick-noise model, arrival covariance, and the arrival-time likelihoods
(conditional on origin time, and with origin time integrated out under a
flat prior)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._errors import DimensionError, InputError, SingularCovarianceError

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class SnrModel:
    """SNR = a*mag - b*ln(distance km) + c (+ per-station offset)."""

    a: float = 1.0
    b: float = 1.2
    c: float = 6.0

    def to_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["a"]), float(d["b"]), float(d["c"]))


@dataclass(frozen=True)
class PickNoiseModel:
    """Pick standard deviation: ``sigma0`` below SNR ``t_L``,
    ``shrink * sigma0`` above ``t_U``, log-linear in between."""

    sigma0: float = 1.0
    shrink: float = 0.1
    t_L: float = 1.0
    t_U: float = 10.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise InputError("sigma0 must be positive")
        if not 0 < self.shrink < 1:
            raise InputError("shrink must lie in (0, 1)")
        if not 0 < self.t_L < self.t_U:
            raise InputError("need 0 < t_L < t_U")

    def to_dict(self):
        return {"sigma0": self.sigma0, "shrink": self.shrink, "t_L": self.t_L, "t_U": self.t_U}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["sigma0"]), float(d["shrink"]), float(d["t_L"]), float(d["t_U"]))


def snr_mean(m: SnrModel, delta, mag, offset=0.0):
    """Deterministic SNR. Distances below 1 km are clamped to 1 km."""
    d = np.maximum(np.asarray(delta, float), 1.0)
    out = m.a * np.asarray(mag, float) - m.b * np.log(d) + m.c + np.asarray(offset, float)
    return out if out.ndim else float(out)


def sigma_meas(p: PickNoiseModel, snr):
    snr = np.asarray(snr, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ramp = p.sigma0 - (p.sigma0 - p.shrink * p.sigma0) / (math.log(p.t_U) - math.log(p.t_L)) \
            * np.log(snr / p.t_L)
    out = np.where(snr < p.t_L, p.sigma0, np.where(snr > p.t_U, p.shrink * p.sigma0, ramp))
    return out if out.ndim else float(out)


def total_sigma(model_sigma, meas_sigma):
    out = np.sqrt(np.asarray(model_sigma, float) ** 2 + np.asarray(meas_sigma, float) ** 2)
    return out if out.ndim else float(out)


def covariance_from_terms(sigma_model, corr, sigma_meas_, nugget=1e-6):
    """sigma_j * corr_jk * sigma_k + diag(sigma_meas^2) + nugget*I, batched."""
    sm = np.asarray(sigma_model, float)
    cov = sm[..., :, None] * np.asarray(corr, float) * sm[..., None, :]
    d = sm.shape[-1]
    idx = np.arange(d)
    cov[..., idx, idx] += np.asarray(sigma_meas_, float) ** 2 + nugget
    return cov


def cholesky(cov):
    """Batched lower Cholesky factor; raises on non-PD input."""
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("covariance is not positive definite") from exc
    if not np.all(np.isfinite(L)):
        raise SingularCovarianceError("covariance is not positive definite")
    return L


def _solve_lower(L, b):
    # batched forward substitution via solve; L (..., d, d), b (..., d, k)
    return np.linalg.solve(L, b)


def mvn_logpdf(resid, cov):
    """Multivariate normal log-density of residual vectors (batched)."""
    resid = np.asarray(resid, float)
    L = cholesky(cov)
    z = _solve_lower(L, resid[..., None])[..., 0]
    d = resid.shape[-1]
    logdet = 2 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (d * LOG_2PI + logdet + np.sum(z * z, axis=-1))


def marginal_logpdf(resid, cov):
    """Log-density of residuals with a common unknown offset integrated
    against a flat prior (batched over leading dimensions)."""
    resid = np.asarray(resid, float)
    d = resid.shape[-1]
    if d == 0:
        return np.zeros(resid.shape[:-1])
    # exact invariance under a common shift; removes cancellation for large offsets
    resid = resid - resid.mean(axis=-1, keepdims=True)
    L = cholesky(cov)
    ones = np.ones(resid.shape)
    z = _solve_lower(L, np.stack([resid, ones], axis=-1))
    zr, z1 = z[..., 0], z[..., 1]
    q = np.sum(zr * zr, axis=-1)
    alpha = np.sum(z1 * zr, axis=-1)
    beta = np.sum(z1 * z1, axis=-1)
    logdet = 2 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * ((d - 1) * LOG_2PI + logdet + np.log(beta) + q - alpha**2 / beta)


def _detected_terms(e, net, d, bundle):
    d = np.asarray(d, bool)
    if d.shape != (len(net),):
        raise DimensionError(f"detection vector length {d.size} != network size {len(net)}")
    terms = bundle.station_terms(e, net)
    return terms, np.flatnonzero(d)


def assemble_covariance(e, net, d, bundle) -> np.ndarray:
    """Arrival covariance over the detecting stations (s^2)."""
    terms, idx = _detected_terms(e, net, d, bundle)
    if idx.size == 0:
        raise InputError("covariance needs at least one detection")
    cov = terms.covariance(bundle.nugget)[0][np.ix_(idx, idx)]
    cholesky(cov)
    return cov


def arrival_loglik_conditional(a, t_o, e, d, net, bundle) -> float:
    """Gaussian log-density of arrivals given the event and origin time."""
    terms, idx = _detected_terms(e, net, d, bundle)
    a = np.asarray(a, float)
    if a.shape != (idx.size,):
        raise DimensionError("arrival vector length must equal the detection count")
    if idx.size == 0:
        raise InputError("conditional likelihood needs at least one detection")
    cov = terms.covariance(bundle.nugget)[0][np.ix_(idx, idx)]
    return float(mvn_logpdf(a - terms.mu[0, idx] - t_o, cov))


def arrival_loglik_marginal(a, e, d, net, bundle) -> float:
    """Arrival log-density with origin time integrated out (flat prior).

    One detection gives log 1 = 0 and no detections the empty product.
    """
    terms, idx = _detected_terms(e, net, d, bundle)
    a = np.asarray(a, float)
    if a.shape != (idx.size,):
        raise DimensionError("arrival vector length must equal the detection count")
    if idx.size == 0:
        return 0.0
    cov = terms.covariance(bundle.nugget)[0][np.ix_(idx, idx)]
    return float(marginal_logpdf(a - terms.mu[0, idx], cov))
