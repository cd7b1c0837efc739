"""Command line front end.

    heston-clse simulate    --config run.json --output out/
    heston-clse estimate    --config run.json --output out/
    heston-clse asymptotics --config run.json --output out/
    heston-clse montecarlo  --config run.json --output out/ --threads 0

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import confidence_intervals, covariance_original
from .errors import ConfigError, HestonClseError, ParameterError
from .estimate import clse_original
from .io import (
    dump_json,
    read_series,
    to_jsonable,
    validate,
    write_coverage_csv,
    write_qq_csv,
    write_records_csv,
    write_rmse_csv,
    write_series,
)
from .model import HestonParams
from .montecarlo import ExperimentConfig, resolve_threads, run_experiment
from .simulate import SimulationConfig, simulate_path

logger = logging.getLogger("heston_clse")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

REQUIRED = {
    "simulate": (("params",), ("simulation", "n")),
    "estimate": (("estimate", "series"),),
    "asymptotics": (("params",),),
    "montecarlo": (("params",), ("montecarlo", "n_grid"), ("montecarlo", "replicates")),
}


def load_config(path, subcommand: str) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: config file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    validate(doc, "config")
    for keys in REQUIRED[subcommand]:
        node = doc
        for key in keys:
            if not isinstance(node, dict) or key not in node:
                raise ConfigError(f"{path}: '{'.'.join(keys)}' is required for {subcommand}")
            node = node[key]
    return doc


def params_from(doc: dict) -> HestonParams:
    try:
        return HestonParams(**doc["params"])
    except ParameterError as exc:
        raise ConfigError(f"params: {exc}") from exc


def simulation_document(p: HestonParams, n: int, sim: SimulationConfig) -> dict:
    return {
        "params": p.to_dict(),
        "n": n,
        "seed": sim.seed,
        "substeps": sim.substeps,
        "scheme": sim.scheme.value,
        "series": "series.csv",
    }


def estimate_document(obs, vol: dict | None = None, level: float = 0.95) -> dict:
    """The JSON document written by ``estimate``; ``vol`` holds sigma1, sigma2, rho."""
    est = clse_original(obs)
    doc = est.to_dict()
    if vol is not None and est.original is not None:
        o = est.original
        p = HestonParams(a=o.a, b=o.b, alpha=o.alpha, beta=o.beta, **vol)
        doc["intervals"] = confidence_intervals(est, p, level).to_dict()
    return doc


def asymptotics_document(p: HestonParams, quadrature: bool = True) -> dict:
    cov = covariance_original(p)
    doc = cov.to_dict()
    doc["params"] = p.to_dict()
    if quadrature:
        from .quadrature import noise_moments_quadrature

        quad = noise_moments_quadrature(p).as_array()
        closed = cov.noise.as_array()
        rel = np.abs(quad - closed) / np.maximum(np.abs(quad), np.finfo(float).tiny)
        names = ("c1", "c2", "c3", "c4", "c5", "c6")
        doc["quadrature"] = {
            "noise": dict(zip(names, quad.tolist())),
            "relative_error": dict(zip(names, rel.tolist())),
            "max_relative_error": float(rel.max()),
        }
    return doc


def experiment_config_from(doc: dict, seed: int | None = None) -> ExperimentConfig:
    mc = doc["montecarlo"]
    sim = SimulationConfig(
        substeps=mc.get("substeps", 64),
        seed=0,
        scheme=mc.get("scheme", "ExactCIR"),
    )
    return ExperimentConfig(
        params=params_from(doc),
        n_grid=tuple(mc["n_grid"]),
        replicates=mc["replicates"],
        seed=mc.get("seed", 0) if seed is None else seed,
        level=mc.get("level", 0.95),
        sim=sim,
    )


def cmd_simulate(doc: dict, out: Path, args) -> None:
    p = params_from(doc)
    s = doc["simulation"]
    seed = args.seed if args.seed is not None else s.get("seed", 0)
    sim = SimulationConfig(substeps=s.get("substeps", 64), seed=seed, scheme=s.get("scheme", "ExactCIR"))
    obs = simulate_path(p, s["n"], sim)
    write_series(out / "series.csv", obs)
    meta = simulation_document(p, s["n"], sim)
    meta = to_jsonable(meta)
    validate(meta, "meta")
    dump_json(out / "meta.json", meta)
    if not args.no_plots:
        from .plotting import plot_series

        plot_series(out / "series.png", obs)
    logger.info("wrote %d observations to %s", obs.y.size, out / "series.csv")


def cmd_estimate(doc: dict, out: Path, args) -> None:
    e = doc["estimate"]
    series = Path(e["series"])
    if not series.is_absolute():
        series = Path(args.config).parent / series
    obs = read_series(series)
    vol_keys = ("sigma1", "sigma2", "rho")
    vol = {k: e[k] for k in vol_keys} if all(k in e for k in vol_keys) else None
    result = estimate_document(obs, vol, e.get("level", 0.95))
    result = to_jsonable(result)
    validate(result, "clse_result")
    dump_json(out / "estimate.json", result)
    if result["out_of_image"]:
        logger.warning("estimate (c, d) = (%g, %g) lies outside the image; no drift parameters", result["c"], result["d"])


def cmd_asymptotics(doc: dict, out: Path, args) -> None:
    p = params_from(doc)
    result = asymptotics_document(p, doc.get("asymptotics", {}).get("quadrature", True))
    result = to_jsonable(result)
    validate(result, "asymptotics")
    dump_json(out / "asymptotics.json", result)


def cmd_montecarlo(doc: dict, out: Path, args) -> None:
    cfg = experiment_config_from(doc, args.seed)
    mc = doc["montecarlo"]
    threads = args.threads if args.threads is not None else doc.get("threads")
    report = run_experiment(cfg, threads=resolve_threads(threads))
    result = report.to_dict()
    result = to_jsonable(result)
    validate(result, "experiment_report")
    dump_json(out / "report.json", result)
    write_rmse_csv(out / "rmse_vs_n.csv", report)
    write_qq_csv(out / "qq_whitened.csv", report)
    write_coverage_csv(out / "coverage.csv", report)
    if mc.get("dump_raw", False):
        write_records_csv(out / "replicates.csv", report.records)
    if mc.get("plots", True) and not args.no_plots:
        from .plotting import plot_coverage, plot_qq, plot_rmse

        plot_rmse(out / "rmse_vs_n.png", report)
        plot_qq(out / "qq_whitened.png", report)
        plot_coverage(out / "coverage.png", report)


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "asymptotics": cmd_asymptotics,
    "montecarlo": cmd_montecarlo,
}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heston-clse",
        description="Simulate the subcritical Heston model and study its conditional least squares estimator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON configuration file")
    common.add_argument("--output", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=_u64, default=None, help="override the configured seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads, 0 = one per CPU")
    common.add_argument("--no-plots", action="store_true", help="skip rendering figures")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, func in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=func.__name__.removeprefix("cmd_"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = load_config(args.config, args.subcommand)
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.subcommand](doc, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HestonClseError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
