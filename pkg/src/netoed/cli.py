"""Command-line front end: ``netoed {fit,analyze,optimize,synth}``.

Exit codes: 0 ok, 2 input error, 3 infeasible region, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from ._errors import InputError, NetoedError
from .bundle import DEFAULT_DELTAS, DEFAULT_DEPTHS, ModelBundle, default_bundle
from .config import RunConfig
from .detection import fit_detection_model, read_catalog
from .earthmodel import (
    Ensemble,
    empirical_correlation,
    fit_kernel_length,
    fit_surrogates,
    synthetic_ensemble,
)
from .eig import eig_total, sensitivity_map, write_sensitivity_csv
from .geo import sobol_events
from .optimize import greedy_place
from .priors import Event, importance_weights
from .synth import synth_dataset, write_datasets_csv


def _provenance(cfg: RunConfig) -> str:
    return f"netoed {__version__} config_sha256={cfg.sha256}"


def _out_path(args, cfg, name):
    out = getattr(args, "out", None) or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _load_bundle(args, cfg: RunConfig) -> ModelBundle:
    path = getattr(args, "bundle", None)
    if path:
        if not os.path.exists(path):
            raise InputError(f"bundle file not found: {path}")
        bundle = ModelBundle.load(path)
    else:
        bundle = default_bundle(cfg.ensemble_members, cfg.ensemble_seed)
    overrides = cfg.bundle_overrides()
    return bundle.replace(**overrides) if overrides else bundle


def _support(cfg: RunConfig):
    events = sobol_events(cfg.n_events, cfg.domain, cfg.seed, prior=cfg.proposal)
    return importance_weights(events, cfg.prior, cfg.proposal)


def cmd_fit(args, cfg: RunConfig) -> int:
    if not args.catalog:
        raise InputError("fit needs --catalog PATH")
    if not os.path.exists(args.catalog):
        raise InputError(f"catalog file not found: {args.catalog}")
    rows = read_catalog(args.catalog)
    det, info = fit_detection_model(rows, cfg.detection_weight, return_info=True)
    if args.ensemble:
        if not os.path.exists(args.ensemble):
            raise InputError(f"ensemble file not found: {args.ensemble}")
        with open(args.ensemble) as fh:
            ens = Ensemble.from_dict(json.load(fh))
    else:
        ens = synthetic_ensemble(cfg.ensemble_members, cfg.ensemble_seed)
    depths = DEFAULT_DEPTHS[(DEFAULT_DEPTHS >= cfg.domain.depth_min) & (DEFAULT_DEPTHS <= cfg.domain.depth_max)]
    mean, sig = fit_surrogates(ens, DEFAULT_DELTAS, depths)
    station_deltas = np.arange(33.0, 600.0, 33.0)
    corr_depths = np.linspace(cfg.domain.depth_min, cfg.domain.depth_max, 9)
    gamma = empirical_correlation(ens, station_deltas, corr_depths)
    mode = cfg.correlation.mode if cfg.correlation is not None else "epicentral-difference"
    corr = fit_kernel_length(gamma, station_deltas, mode=mode)
    bundle = ModelBundle(det, mean, sig, corr, ensemble=ens)
    overrides = {k: v for k, v in cfg.bundle_overrides().items() if k != "correlation"}
    if overrides:
        bundle = bundle.replace(**overrides)
    path = args.bundle or _out_path(args, cfg, "bundle.json")
    d = bundle.to_dict()
    d["provenance"] = _provenance(cfg)
    with open(path, "w") as fh:
        json.dump(d, fh)
        fh.write("\n")
    print(f"detection: alpha={det.alpha:.4f} beta={det.beta:.4f} gamma_m={det.gamma_m:.4f} "
          f"delta0={det.delta0:.4f} (converged={info['converged']}, rows={len(rows)})")
    print(f"sigma surrogate: degree {sig.degree}, rms residual {sig.rms_residual:.4f} s")
    print(f"correlation length: {corr.length_scale:.2f} km ({corr.mode})")
    print(f"wrote {path}")
    return 0


def cmd_analyze(args, cfg: RunConfig) -> int:
    bundle = _load_bundle(args, cfg)
    support = _support(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = eig_total(support, cfg.network, bundle, cfg.n_realizations, cfg.seed,
                           use_arrivals=cfg.use_arrivals)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report.settings.update({"config_sha256": cfg.sha256, "version": __version__})
    csv_path = _out_path(args, cfg, "sensitivity.csv")
    write_sensitivity_csv(csv_path, sensitivity_map(report), _provenance(cfg))
    report.write_json(_out_path(args, cfg, "eig_report.json"))
    print(f"total EIG: {report.total_eig:.6f} nats (MC se {report.total_std_error:.6f})")
    return 0


def cmd_optimize(args, cfg: RunConfig) -> int:
    bundle = _load_bundle(args, cfg)
    support = _support(cfg)

    def report(rec):
        print(f"sensor {rec.sensor_idx}: ({rec.lat:.5f}, {rec.lon:.5f}) EIG {rec.eig_total:.6f} nats")

    net, trace = greedy_place(cfg.network, cfg.k, cfg.region, support, bundle, budget=cfg.budget,
                              seed=cfg.seed, n_realizations=cfg.n_realizations,
                              snr_offset=cfg.snr_offset, n_init=cfg.n_init,
                              use_arrivals=cfg.use_arrivals, acquisition=cfg.acquisition,
                              callback=report, within=cfg.domain)
    d = net.to_dict()
    d["provenance"] = _provenance(cfg)
    with open(_out_path(args, cfg, "network.json"), "w") as fh:
        json.dump(d, fh, indent=2)
        fh.write("\n")
    trace.write_csv(_out_path(args, cfg, "trace.csv"), _provenance(cfg))
    return 0


def cmd_synth(args, cfg: RunConfig) -> int:
    if not args.event:
        raise InputError("synth needs --event LAT,LON,DEPTH,MAG")
    try:
        lat, lon, depth, mag = (float(v) for v in args.event.split(","))
        ev = Event(lat, lon, depth, mag)
    except ValueError as exc:
        raise InputError(f"bad --event {args.event!r}: {exc}") from exc
    if not cfg.domain.contains(lat, lon, depth):
        raise InputError(f"event {args.event} lies outside the domain")
    bundle = _load_bundle(args, cfg)
    n = args.n or cfg.n_realizations
    data = synth_dataset(ev, cfg.network, bundle, n, cfg.seed)
    path = _out_path(args, cfg, "datasets.csv")
    write_datasets_csv(path, data, _provenance(cfg))
    print(f"wrote {n} datasets to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="run configuration JSON")
    common.add_argument("--bundle", default=argparse.SUPPRESS, help="model bundle JSON")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="overrides config seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = argparse.ArgumentParser(prog="netoed", parents=[common],
                                     description="Seismic network EIG analysis and sensor placement.")
    parser.add_argument("--version", action="version", version=f"netoed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fit", parents=[common], help="fit models and write a bundle")
    p.add_argument("--catalog", help="detection catalog CSV")
    p.add_argument("--ensemble", help="velocity-profile ensemble JSON (default: synthetic)")
    sub.add_parser("analyze", parents=[common], help="sensitivity map and total EIG")
    sub.add_parser("optimize", parents=[common], help="greedy sensor placement")
    p = sub.add_parser("synth", parents=[common], help="write synthetic datasets")
    p.add_argument("--event", help="LAT,LON,DEPTH,MAG")
    p.add_argument("--n", type=int, help="number of realizations")
    return parser


COMMANDS = {"fit": cmd_fit, "analyze": cmd_analyze, "optimize": cmd_optimize, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("config", "bundle", "seed", "out"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        if args.config:
            cfg = RunConfig.load(args.config, args.seed)
        elif args.seed is not None:
            cfg = RunConfig.from_dict({}, args.seed)
        else:
            raise InputError("need --config PATH or --seed N")
        return COMMANDS[args.command](args, cfg)
    except NetoedError as exc:
        print(f"netoed: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"netoed: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
