"""``nlbranch`` command-line entry point.

Exit codes: 0 success, 1 a validation criterion failed, 2 bad configuration
or parameters, 3 numerical failure (non-finite state, quadrature trouble).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .acceptance import CRITERIA, run_suite
from .analytics import c_alpha_a, g_a, h_a, h_a_first_line
from .classifier import classify_all
from .exceptions import ConfigError, NumericalError, ParameterError
from .io import ExperimentConfig, load_config, parse_config, write_json, write_path_csv
from .montecarlo import ExplodedBy, ExtinctBy, HitsAbove, HitsBelow, estimate_event_prob
from .sampler import make_rng
from .simulator import simulate_path

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_ANALYTICS_COLUMNS = ["u", "G_a", "G_a_drift", "G_a_diffusion", "G_a_jump",
                      "H_a", "H_a_quadrature", "H_a_scaled", "c_alpha_a"]

_HELP = {
    "classify": (
        "Classify extinction, explosion and coming down from infinity for a "
        "power-law model.  Writes classify.json holding the resolved config and "
        "the boundary report (verdicts plus the conditions that fired)."
    ),
    "analytics": (
        "Tabulate G_a and H_a over a log-spaced u grid.  Writes analytics.csv with "
        "columns: u; G_a; G_a_drift, G_a_diffusion, G_a_jump (G_a = drift - "
        "diffusion - jump); H_a (closed form a(a-1)c_{alpha,a}u^-alpha); "
        "H_a_quadrature (direct quadrature of the compensated integral); "
        "H_a_scaled (H_a_quadrature * u^alpha / (a(a-1)), constant in u and equal "
        "to c_alpha_a); c_alpha_a.  Also writes analytics.json with the config."
    ),
    "simulate": (
        "Simulate Euler paths.  Writes path_NNNNN.csv (columns: t = time, x = "
        "state) for each path and simulate.json with the resolved config, seed "
        "and per-path summaries."
    ),
    "estimate": (
        "Monte Carlo probability of an event (ExtinctBy, ExplodedBy, HitsBelow, "
        "HitsAbove).  Writes estimate.json and estimate.csv (columns: event, t, "
        "level, mean, stderr, n, ci95_low, ci95_high)."
    ),
    "validate": (
        "Run the built-in acceptance suite; prints one PASS/FAIL line per "
        "criterion and writes validate.json.  Exits 1 if any criterion fails."
    ),
}


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=FsPath, help="JSON experiment config (schema_version 1)")
    shared.add_argument("--seed", type=int, help="master seed (unsigned 64-bit); overrides the config")
    shared.add_argument("--out", type=FsPath, default=FsPath("."), help="output directory (default: .)")
    shared.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")

    parser = argparse.ArgumentParser(prog="nlbranch", description="Nonlinear branching processes toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in _HELP.items():
        p = sub.add_parser(name, parents=[shared], help=text.split(".")[0], description=text)
        if name == "validate":
            p.add_argument("--criteria", type=int, nargs="+", help="subset of criteria to run")
    return parser


def _load(args) -> ExperimentConfig:
    if args.config is None:
        return parse_config({"schema_version": 1})
    return load_config(args.config)


def _need_model(cfg: ExperimentConfig):
    if cfg.model is None:
        raise ConfigError("config has no model section")
    return cfg.model


def _need_seed(args, cfg: ExperimentConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise ConfigError("stochastic commands need a seed (--seed or config 'seed')")
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return int(seed)


def _cmd_classify(args, cfg: ExperimentConfig) -> int:
    model = _need_model(cfg)
    report = classify_all(model.rates, model.alpha)
    write_json(args.out / "classify.json", {"config": cfg.resolved(), "report": report.to_dict()})
    print(" ".join(f"{k}={v}" for k, v in report.to_dict().items() if k != "citations"))
    return EXIT_OK


def _cmd_analytics(args, cfg: ExperimentConfig) -> int:
    model = _need_model(cfg)
    sec = cfg.section("analytics")
    a = sec.get("a", 2.0)
    u_min, u_max, n_u = sec.get("u_min", 1e-3), sec.get("u_max", 1e3), sec.get("n_u", 61)
    if not (0 < u_min < u_max) or n_u < 2:
        raise ConfigError("analytics grid needs 0 < u_min < u_max and n_u >= 2")
    alpha = model.alpha
    c = c_alpha_a(alpha, a)
    rows = []
    for u in np.logspace(math.log10(u_min), math.log10(u_max), n_u):
        u = float(u)
        g = g_a(model, u, a)
        hq = h_a_first_line(model.jumps, u, a)
        rows.append([u, g.value, *g.parts, h_a(model, u, a), hq, hq * u ** alpha / (a * (a - 1.0)), c])
    if not np.all(np.isfinite(rows)):
        raise NumericalError("non-finite value in analytics table")
    with open(args.out / "analytics.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_ANALYTICS_COLUMNS)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    write_json(args.out / "analytics.json", {"config": cfg.resolved(), "columns": _ANALYTICS_COLUMNS})
    return EXIT_OK


def _cmd_simulate(args, cfg: ExperimentConfig) -> int:
    model = _need_model(cfg)
    seed = _need_seed(args, cfg)
    sec = cfg.section("simulate")
    x0 = sec.get("x0", 1.0)
    levels = tuple(sec.get("levels", ()))
    n = sec.get("n_paths", 1)
    if n < 1 or x0 <= 0:
        raise ConfigError("simulate needs n_paths >= 1 and x0 > 0")
    summaries = []
    for i in range(n):
        path = simulate_path(model, x0, cfg.sim, make_rng(seed, i), levels=levels)
        write_path_csv(args.out / f"path_{i:05d}.csv", path)
        summaries.append(path.summary())
    write_json(args.out / "simulate.json", {"config": cfg.resolved(seed), "paths": summaries})
    return EXIT_OK


_EVENTS = {"ExtinctBy": ExtinctBy, "ExplodedBy": ExplodedBy, "HitsBelow": HitsBelow, "HitsAbove": HitsAbove}


def _cmd_estimate(args, cfg: ExperimentConfig) -> int:
    model = _need_model(cfg)
    seed = _need_seed(args, cfg)
    sec = cfg.section("estimate")
    if "event" not in sec:
        raise ConfigError("estimate section needs an event")
    ev = dict(sec["event"])
    kind = ev.pop("kind")
    event = _EVENTS[kind](**ev)
    x0 = sec.get("x0", 1.0)
    n = sec.get("n_paths", 10_000)
    est = estimate_event_prob(model, x0, cfg.sim, event, n, workers=args.workers, seed=seed)
    level = ev.get("level", "")
    write_json(args.out / "estimate.json", {
        "config": cfg.resolved(seed),
        "event": sec["event"],
        "x0": x0,
        "estimate": est.to_dict(),
    })
    lo, hi = est.ci95
    with open(args.out / "estimate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event", "t", "level", "mean", "stderr", "n", "ci95_low", "ci95_high"])
        w.writerow([kind, repr(ev["t"]), repr(level) if level != "" else "", repr(est.mean),
                    repr(est.stderr), est.n, repr(lo), repr(hi)])
    print(f"{kind} mean={est.mean:.6f} stderr={est.stderr:.6f} n={est.n}")
    return EXIT_OK


def _cmd_validate(args, cfg: ExperimentConfig) -> int:
    numbers = args.criteria or cfg.section("validate").get("criteria") or sorted(CRITERIA)
    bad = sorted(set(numbers) - set(CRITERIA))
    if bad:
        raise ConfigError(f"unknown criteria: {bad}")
    results = run_suite(numbers, workers=args.workers, echo=lambda s: print(s, flush=True))
    ok = all(r.passed for r in results)
    write_json(args.out / "validate.json", {
        "config": cfg.resolved(),
        "workers": args.workers,
        "all_pass": ok,
        "criteria": [r.to_dict() for r in results],
    })
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_OK if ok else EXIT_VALIDATION


_COMMANDS = {
    "classify": _cmd_classify,
    "analytics": _cmd_analytics,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = _load(args)
        args.out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"nlbranch: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"nlbranch: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
