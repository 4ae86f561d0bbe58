"""The model bundle: everything the likelihood needs, plus per-event
station terms evaluated in bulk."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from ._errors import InputError
from .arrivals import PickNoiseModel, SnrModel, covariance_from_terms, sigma_meas, snr_mean
from .detection import DetectionModel
from .earthmodel import (
    CorrelationModel,
    Ensemble,
    MeanSurrogate,
    SigmaSurrogate,
    fit_surrogates,
    synthetic_ensemble,
)
from .geo import KM_PER_DEGREE, central_angle
from .priors import events_to_array

BUNDLE_FORMAT = "netoed-bundle"
BUNDLE_VERSION = 1


@dataclass
class StationTerms:
    """Per (event, station) model quantities; leading axis runs over events."""

    dist_deg: np.ndarray
    dist_km: np.ndarray
    logit: np.ndarray
    mu: np.ndarray
    sigma_model: np.ndarray
    sigma_meas: np.ndarray
    corr: np.ndarray

    def covariance(self, nugget: float) -> np.ndarray:
        return covariance_from_terms(self.sigma_model, self.corr, self.sigma_meas, nugget)


@dataclass(frozen=True)
class ModelBundle:
    detection: DetectionModel
    mean_tt: MeanSurrogate
    sigma_tt: SigmaSurrogate
    correlation: CorrelationModel = field(default_factory=CorrelationModel)
    snr: SnrModel = field(default_factory=SnrModel)
    pick_noise: PickNoiseModel = field(default_factory=PickNoiseModel)
    nugget: float = 1e-6
    ensemble: Optional[Ensemble] = None

    def replace(self, **changes) -> "ModelBundle":
        return replace(self, **changes)

    def station_terms(self, events, net) -> StationTerms:
        """Evaluate distances, detection logits, travel-time mean/sigma,
        pick noise and station correlation for every (event, station)."""
        x = events_to_array(events) if not isinstance(events, np.ndarray) else np.atleast_2d(events)
        lat, lon, depth, mag = (x[:, i][:, None] for i in range(4))
        dist_deg = central_angle(lat, lon, net.lats[None, :], net.lons[None, :])
        dist_km = dist_deg * KM_PER_DEGREE
        depth_b = np.broadcast_to(depth, dist_km.shape)
        logit = self.detection.logit(dist_deg, depth, mag)
        mu = np.asarray(self.mean_tt(dist_km, depth_b))
        sm = np.asarray(self.sigma_tt(dist_km, depth_b))
        snr = snr_mean(self.snr, dist_km, mag, net.offsets[None, :])
        smeas = np.asarray(sigma_meas(self.pick_noise, snr))
        corr = self.correlation_matrix(dist_km, net)
        return StationTerms(dist_deg, dist_km, logit, mu, sm, smeas, corr)

    def correlation_matrix(self, dist_km, net) -> np.ndarray:
        n_ev, n = dist_km.shape
        mode = self.correlation.mode
        ell = self.correlation.length_scale
        if mode == "independent":
            return np.broadcast_to(np.eye(n), (n_ev, n, n))
        if mode == "station-separation":
            sep = central_angle(net.lats[:, None], net.lons[:, None],
                                net.lats[None, :], net.lons[None, :]) * KM_PER_DEGREE
            return np.broadcast_to(np.exp(-0.5 * sep**2 / ell**2), (n_ev, n, n))
        diff = dist_km[:, :, None] - dist_km[:, None, :]
        return np.exp(-0.5 * diff**2 / ell**2)

    def to_dict(self) -> dict:
        d = {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "detection": self.detection.to_dict(),
            "mean_tt": self.mean_tt.to_dict(),
            "sigma_tt": self.sigma_tt.to_dict(),
            "correlation": self.correlation.to_dict(),
            "snr": self.snr.to_dict(),
            "pick_noise": self.pick_noise.to_dict(),
            "nugget": self.nugget,
        }
        if self.ensemble is not None:
            d["ensemble"] = self.ensemble.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        if d.get("format") != BUNDLE_FORMAT or d.get("version") != BUNDLE_VERSION:
            raise InputError(f"not a {BUNDLE_FORMAT} v{BUNDLE_VERSION} file")
        return cls(
            DetectionModel.from_dict(d["detection"]),
            MeanSurrogate.from_dict(d["mean_tt"]),
            SigmaSurrogate.from_dict(d["sigma_tt"]),
            CorrelationModel.from_dict(d["correlation"]),
            SnrModel.from_dict(d["snr"]),
            PickNoiseModel.from_dict(d["pick_noise"]),
            float(d["nugget"]),
            Ensemble.from_dict(d["ensemble"]) if "ensemble" in d else None,
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModelBundle":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# surrogate grid: 0-600 km epicentral distance, 0-40 km depth
DEFAULT_DELTAS = np.linspace(0.0, 600.0, 301)
DEFAULT_DEPTHS = np.linspace(0.0, 40.0, 17)


@lru_cache(maxsize=8)
def _default_surrogates(n_members: int, seed: int):
    ens = synthetic_ensemble(n_members, seed)
    mean, sig = fit_surrogates(ens, DEFAULT_DELTAS, DEFAULT_DEPTHS)
    return ens, mean, sig


def default_bundle(n_members: int = 121, seed: int = 0, keep_ensemble: bool = False,
                   **overrides) -> ModelBundle:
    """Bundle built from the synthetic ensemble with default noise and
    detection models; keyword overrides replace individual fields."""
    ens, mean, sig = _default_surrogates(n_members, seed)
    b = ModelBundle(DetectionModel(), mean, sig, ensemble=ens if keep_ensemble else None)
    return replace(b, **overrides) if overrides else b
