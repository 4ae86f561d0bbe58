"""Run configuration (JSON) shared by the command-line workflows."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from ._errors import InputError
from .arrivals import PickNoiseModel, SnrModel
from .earthmodel import CorrelationModel
from .geo import MONITORING_BOX, Domain, PolygonRegion
from .network import SensorNetwork
from .priors import PriorSpec

_TOP_KEYS = {"seed", "domain", "prior", "proposal", "network", "noise", "correlation", "eig",
             "optimize", "fit", "output"}


@dataclass
class RunConfig:
    seed: int
    domain: Domain = MONITORING_BOX
    prior: Optional[PriorSpec] = None
    proposal: Optional[PriorSpec] = None
    network: SensorNetwork = field(default_factory=SensorNetwork)
    snr: Optional[SnrModel] = None
    pick_noise: Optional[PickNoiseModel] = None
    correlation: Optional[CorrelationModel] = None
    n_events: int = 512
    n_realizations: int = 32
    use_arrivals: bool = True
    k: int = 1
    budget: int = 100
    n_init: int = 10
    snr_offset: float = 0.0
    acquisition: str = "ei"
    region: object = None
    detection_weight: float = 2.0
    ensemble_members: int = 121
    ensemble_seed: int = 0
    out_dir: str = "."
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.prior is None:
            self.prior = PriorSpec.uniform(self.domain)
        if self.proposal is None:
            self.proposal = PriorSpec.uniform(self.domain, self.prior.mag_rate, self.prior.mag_min)
        if self.region is None:
            self.region = self.domain

    @property
    def sha256(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def from_dict(cls, d: dict, seed: int | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise InputError("config must be a JSON object")
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        d = json.loads(json.dumps(d))
        if seed is not None:
            d["seed"] = int(seed)
        if "seed" not in d:
            raise InputError("config must set 'seed' (or pass --seed)")
        try:
            domain = Domain.from_dict(d["domain"]) if "domain" in d else MONITORING_BOX
            prior = PriorSpec.from_dict(d["prior"], domain) if "prior" in d else None
            proposal = PriorSpec.from_dict(d["proposal"], domain) if "proposal" in d else None
            network = SensorNetwork.from_dict(d["network"]) if "network" in d else SensorNetwork()
            noise = d.get("noise", {})
            snr = SnrModel.from_dict(noise["snr"]) if "snr" in noise else None
            pick = PickNoiseModel.from_dict(noise["pick"]) if "pick" in noise else None
            corr = CorrelationModel.from_dict(d["correlation"]) if "correlation" in d else None
            eig = d.get("eig", {})
            opt = d.get("optimize", {})
            region = None
            if "region" in opt:
                reg = opt["region"]
                if reg.get("type", "polygon") == "polygon":
                    region = PolygonRegion.from_geojson(reg["coordinates"])
                else:
                    region = Domain.from_dict(reg)
            fit = d.get("fit", {})
            ens = fit.get("ensemble", {})
            cfg = cls(
                seed=int(d["seed"]),
                domain=domain,
                prior=prior,
                proposal=proposal,
                network=network,
                snr=snr,
                pick_noise=pick,
                correlation=corr,
                n_events=int(eig.get("n_events", 512)),
                n_realizations=int(eig.get("n_realizations", 32)),
                use_arrivals=bool(eig.get("use_arrivals", True)),
                k=int(opt.get("k", 1)),
                budget=int(opt.get("budget", 100)),
                n_init=int(opt.get("n_init", 10)),
                snr_offset=float(opt.get("snr_offset", 0.0)),
                acquisition=str(opt.get("acquisition", "ei")),
                region=region,
                detection_weight=float(fit.get("detection_weight", 2.0)),
                ensemble_members=int(ens.get("n_members", 121)),
                ensemble_seed=int(ens.get("seed", 0)),
                out_dir=str(d.get("output", {}).get("dir", ".")),
                raw=d,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"invalid config: {exc!r}") from exc
        if cfg.n_events < 1 or cfg.n_realizations < 1:
            raise InputError("eig.n_events and eig.n_realizations must be >= 1")
        return cfg

    @classmethod
    def load(cls, path, seed: int | None = None) -> "RunConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except FileNotFoundError as exc:
            raise InputError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(d, seed)

    def bundle_overrides(self) -> dict:
        out = {}
        if self.snr is not None:
            out["snr"] = self.snr
        if self.pick_noise is not None:
            out["pick_noise"] = self.pick_noise
        if self.correlation is not None:
            out["correlation"] = self.correlation
        return out
