"""Command-line interface: ``betashrink fit | simulate | asymptotics``.

Exit codes: 0 success, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import dataclasses
import logging
import os
import sys

import numpy as np

from .errors import DataError, DomainError, SolverError

EXIT_OK, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("betashrink")


def _parse_value(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        pass
    if "," in text:
        return [_parse_value(t) for t in text.split(",") if t.strip()]
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    return text


def read_flat_config(path) -> dict:
    """``key = value`` lines (``#`` comments allowed, no sections)."""
    with open(path) as fh:
        body = fh.read()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + body)
    except configparser.Error as exc:
        raise DataError(f"cannot parse config {path}: {exc}") from exc
    return {k: _parse_value(v) for k, v in cp["config"].items()}


def _check_keys(cfg: dict, allowed, what: str):
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise DataError(f"unknown {what} config keys: {unknown}")


def _as_list(v):
    if v is None or isinstance(v, list):
        return v
    if isinstance(v, tuple):
        return list(v)
    if isinstance(v, str):
        return [s.strip() for s in v.split(",") if s.strip()]
    return [v]


def _number_or_word(text, word):
    if text is None or text == word:
        return word
    return float(text)


# -- fit -------------------------------------------------------------------

def cmd_fit(args) -> int:
    from .model import W_CONVENTION
    from .pipeline import AnalysisSpec, analyze

    cfg = read_flat_config(args.config) if args.config else {}
    fields = {f.name for f in dataclasses.fields(AnalysisSpec)}
    _check_keys(cfg, fields | {"out"}, "fit")
    opts = {k: v for k, v in cfg.items() if k in fields}
    for key in ("data", "response", "alpha", "bootstrap", "seed", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            opts["n_jobs" if key == "jobs" else key] = val
    if args.predictors is not None:
        opts["predictors"] = _as_list(args.predictors)
    if args.inactive is not None:
        opts["inactive"] = args.inactive
    if isinstance(opts.get("inactive"), (str, list, tuple)) and opts.get("inactive") != "auto-aic":
        opts["inactive"] = _as_list(opts["inactive"])
    if "predictors" in opts:
        opts["predictors"] = _as_list(opts["predictors"])
    if args.k is not None:
        opts["k"] = _number_or_word(args.k, "estimate")
    if args.delta is not None:
        opts["delta"] = _number_or_word(args.delta, "optimize")
    if args.no_intercept:
        opts["intercept"] = False
    if args.squeeze:
        opts["squeeze"] = True
    if "data" not in opts or "response" not in opts:
        raise DataError("--data and --response are required")
    out = args.out or cfg.get("out")

    table = analyze(AnalysisSpec(**opts))
    if out:
        table.to_csv(out)
    if not args.quiet:
        print(f"condition number of X'WX: {table.condition_number:.6g}")
        print(f"AIC full: {table.aic_full:.6g}   AIC restricted: {table.aic_restricted:.6g}")
        print(f"k = {table.k:.6g}   delta = {table.delta:.4g}   T_n = {table.t_n:.6g}")
        print(f"inactive: {', '.join(table.inactive) or '(none)'}")
        if "dropped_rows" in table.meta:
            print(f"incomplete rows dropped: {table.meta['dropped_rows']}")
        if table.bootstrap_used or table.bootstrap_failures:
            flag = "  [FLAGGED]" if table.flagged else ""
            print(f"bootstrap: {table.bootstrap_used} used, {table.bootstrap_failures} failed{flag}")
        print(f"weights: {W_CONVENTION}")
        print()
        print(table.presentation())
    return EXIT_OK


# -- simulate --------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .simulation import ScreenSpec, SimConfig, run_highdim, run_sweep

    cfg = read_flat_config(args.config) if args.config else {}
    fields = {f.name for f in dataclasses.fields(SimConfig)}
    _check_keys(cfg, fields, "simulate")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.jobs is not None:
        cfg["n_jobs"] = args.jobs
    for key in ("beta1", "delta_grid"):
        if key in cfg:
            cfg[key] = tuple(np.atleast_1d(cfg[key]).astype(float))
    config = SimConfig(**cfg)
    if args.screen:
        screen = ScreenSpec(kind=args.screen, retain_inactive=args.retain_inactive,
                            alpha_screen=args.alpha_screen, bonferroni=args.bonferroni)
        table = run_highdim(config, screen)
    else:
        table = run_sweep(config)
    out = args.out
    if os.path.isdir(out):
        out = os.path.join(out, "rmse.csv")
    table.to_csv(out)
    if args.figure_data:
        table.to_figure_csv(args.figure_data)
    flagged = [d for d, f in table.meta["failures"].items() if f > 0.05 * config.reps]
    if flagged:
        print(f"warning: more than 5% failed fits at Delta = {flagged}", file=sys.stderr)
    return EXIT_OK


# -- asymptotics -----------------------------------------------------------

ASYM_KEYS = ("n", "p1", "p2", "rho", "phi", "beta1", "vartheta", "k", "alpha", "delta",
             "form", "seed", "information")


def cmd_asymptotics(args) -> int:
    from .asymptotics import population_report
    from .estimators import ESTIMATORS, Restriction
    from .simulation import SimConfig, gen_design, rep_rng

    cfg = {"n": 10_000, "p1": 3, "p2": 3, "rho": 0.5, "phi": 5.0, "beta1": (0.55, -0.35, 0.29),
           "vartheta": 0.0, "k": 0.0, "alpha": 0.05, "delta": 0.5, "form": "paper", "seed": 0,
           "information": "profile"}
    if args.config:
        user = read_flat_config(args.config)
        _check_keys(user, ASYM_KEYS, "asymptotics")
        cfg.update(user)
    for key in ("form", "seed", "k", "alpha", "delta"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    sim = SimConfig(n=int(cfg["n"]), p1=int(cfg["p1"]), p2=int(cfg["p2"]), rho=float(cfg["rho"]),
                    phi=float(cfg["phi"]), beta1=tuple(np.atleast_1d(cfg["beta1"])), reps=1)
    vartheta = np.broadcast_to(np.asarray(cfg["vartheta"], dtype=float), (sim.p2,)).copy()
    X = gen_design(sim, rep_rng(int(cfg["seed"]), 0))
    beta = np.concatenate([sim.active_coefficients(), vartheta / np.sqrt(sim.n)])
    r = Restriction.zero(sim.p, range(sim.p1, sim.p))
    rep = population_report(X, beta, sim.phi, r, vartheta, float(cfg["k"]), float(cfg["alpha"]),
                            float(cfg["delta"]), cfg["form"], cfg["information"])
    p = sim.p
    header = (["estimator"] + [f"bias_{j + 1}" for j in range(p)]
              + [f"var_{j + 1}{j + 1}" for j in range(p)])
    lines = [",".join(header)]
    for name in ESTIMATORS:
        b, v = rep.bias[name], rep.variance[name]
        if b is None:
            vals = ["nan"] * (2 * p)
        else:
            vals = [f"{x:.17g}" for x in (*b, *np.diag(v))]
        lines.append(",".join([name, *vals]))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="betashrink", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a beta regression and tabulate all estimators")
    f.add_argument("--config", help="flat key = value file mirroring AnalysisSpec")
    f.add_argument("--data")
    f.add_argument("--response")
    f.add_argument("--predictors", help="comma-separated; default all other columns")
    f.add_argument("--inactive", help="comma-separated column names, or 'auto-aic'")
    f.add_argument("--alpha", type=float)
    f.add_argument("--k", help="ridge parameter or 'estimate'")
    f.add_argument("--delta", help="shrinkage weight or 'optimize'")
    f.add_argument("--bootstrap", type=int, help="number of bootstrap resamples")
    f.add_argument("--seed", type=int)
    f.add_argument("--jobs", type=int)
    f.add_argument("--no-intercept", action="store_true")
    f.add_argument("--squeeze", action="store_true", help="map y to (y(n-1)+0.5)/n")
    f.add_argument("--out", help="CSV path (variable,estimator,coef,se)")
    f.add_argument("-q", "--quiet", action="store_true")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="relative-MSE Monte Carlo sweep")
    s.add_argument("--config", help="flat key = value file with SimConfig fields")
    s.add_argument("--out", default="rmse.csv", help="output file or directory")
    s.add_argument("--figure-data", help="long-format per-Delta CSV for plotting")
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--screen", choices=["oracle", "marginal"],
                   help="run the high-dimensional sweep with this screen")
    s.add_argument("--retain-inactive", type=int, default=10)
    s.add_argument("--alpha-screen", type=float, default=0.01)
    s.add_argument("--bonferroni", action="store_true")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("asymptotics", help="closed-form asymptotic bias and risk")
    a.add_argument("--config", help=f"flat key = value file; keys: {', '.join(ASYM_KEYS)}")
    a.add_argument("--form", choices=["paper", "derived"])
    a.add_argument("--k", type=float)
    a.add_argument("--alpha", type=float)
    a.add_argument("--delta", type=float)
    a.add_argument("--seed", type=int)
    a.add_argument("--out")
    a.set_defaults(func=cmd_asymptotics)
    return ap


def main(argv=None) -> int:
    from .pipeline import StageError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        numeric = isinstance(exc.cause, (SolverError, np.linalg.LinAlgError))
        return EXIT_NUMERIC if numeric else EXIT_DATA
    except (DataError, DomainError, FileNotFoundError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
