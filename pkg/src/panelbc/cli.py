"""Command-line front end: ``panelbc fit``, ``panelbc simulate`` and ``panelbc replicate-table``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
import warnings
from typing import Optional

import numpy as np

from . import __version__
from .ape import ape_for
from .biascorr import BcConfig, abc1, abc2, abc3, abc4, spj1, spj2
from .dataio import ColumnRoles, read_panel_csv
from .errors import DataError, NumericalError, PanelBCError, UnknownTable
from .families import Family
from .feglm import FitConfig, fit
from .panel import BINARY, CONTINUOUS
from .simlab.dgp import GENERATOR, DgpConfig
from .simlab.montecarlo import parse_estimator, run_monte_carlo
from .simlab.tables import format_table, replicate_table

SCHEMA_VERSION = 1
THREADS_ENV = "PANELBC_THREADS"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4
VARIANTS = ("abc1", "abc2", "abc3", "abc4", "spj1", "spj2")

logger = logging.getLogger("panelbc")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing


class _Correction(argparse.Action):
    def __call__(self, parser, ns, value, option_string=None):
        items = list(getattr(ns, "corrections", None) or [])
        items.append({"variant": value, "bandwidth": None})
        ns.corrections = items


class _Bandwidth(argparse.Action):
    """``--bandwidth`` attaches to the most recent ``--correction``."""

    def __call__(self, parser, ns, value, option_string=None):
        items = list(getattr(ns, "corrections", None) or [])
        if not items:
            parser.error("--bandwidth must follow a --correction")
        if items[-1]["bandwidth"] is not None:
            items.append({"variant": items[-1]["variant"], "bandwidth": value})
        else:
            items[-1] = dict(items[-1], bandwidth=value)
        ns.corrections = items


def _regressor(text: str):
    name, _, kind = text.partition(":")
    kind = kind or CONTINUOUS
    if kind not in (CONTINUOUS, BINARY) or not name:
        raise argparse.ArgumentTypeError(f"expected NAME or NAME:{{{CONTINUOUS},{BINARY}}}, got {text!r}")
    return name, kind


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="panelbc", description="Fixed-effects binary-choice panels with bias corrections.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--reproducible", action="store_true",
                        help="omit wall-clock timings so reports are byte-identical across runs")

    f = sub.add_parser("fit", parents=[common], help="fit a panel read from CSV")
    f.add_argument("input", help="CSV file with a header row")
    f.add_argument("--outcome", "-y", required=True)
    f.add_argument("--indiv", "-i", required=True)
    f.add_argument("--time", "-t", required=True)
    f.add_argument("--regressor", "-x", action="append", type=_regressor, default=[],
                   metavar="NAME[:KIND]", help="regressor column; KIND is continuous (default) or binary")
    f.add_argument("--lag-outcome", metavar="NAME",
                   help="add the outcome one period earlier as a regressor called NAME")
    f.add_argument("--family", default="probit", choices=("logit", "probit", "cloglog", "gaussian"))
    f.add_argument("--correction", action=_Correction, choices=VARIANTS, dest="corrections",
                   help="bias correction; repeatable")
    f.add_argument("--bandwidth", action=_Bandwidth, type=int, metavar="L", dest="corrections",
                   help="bandwidth of the preceding --correction (default 1)")
    f.add_argument("--covariance", choices=("simplified", "full"), default="simplified")
    f.add_argument("--exogenous", action="store_true", help="all regressors strictly exogenous")
    f.add_argument("--output", "-o", help="report path (default: stdout)")
    f.set_defaults(corrections=[])

    s = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo design")
    s.add_argument("--design", choices=("dynamic-probit", "dynamic-linear"), default="dynamic-probit")
    s.add_argument("--pattern", choices=("balanced", "pattern1", "pattern2"), default="balanced")
    s.add_argument("--N", type=_positive, default=200)
    s.add_argument("--T", type=_positive, default=10)
    for k in ("N1", "N2", "T1", "T2"):
        s.add_argument(f"--{k}", type=_positive)
    s.add_argument("--estimators", default=None,
                   help="comma separated, e.g. MLE,ABC1(1),SPJ1,LPM(1)")
    s.add_argument("--reps", type=_positive, default=100)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--threads", type=_positive, default=None)
    s.add_argument("--keep-draws", action="store_true", help="also write per-replication estimates")
    s.add_argument("--output", "-o", help="output prefix; writes PREFIX.json and PREFIX.csv")

    r = sub.add_parser("replicate-table", parents=[common], help="rerun the designs behind a table")
    r.add_argument("table", help="table id: 2, 3, 4, 5, 6, 7, 8, 9 or 12")
    r.add_argument("--reps", type=_positive, default=100)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--threads", type=_positive, default=None)
    r.add_argument("--output", "-o", help="write the formatted table here (default: stdout)")
    r.add_argument("--json", help="also write the summaries as JSON")
    return ap


# ---------------------------------------------------------------------------
# reports


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else None
    return v


def metadata(args, seed=None, wall=None) -> dict:
    # thread count and output locations do not change results
    skip = ("verbose", "threads", "output", "json")
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {
        "package": "panelbc",
        "version": __version__,
        "numpy": np.__version__,
        "generator": GENERATOR,
        "seed": seed,
        "spec": _jsonable(echo),
        "wall_time_s": None if args.reproducible else wall,
    }


def _dump(obj, path: Optional[str]) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _coef_block(names, beta, se) -> list:
    return [{"name": n, "estimate": float(b), "se": float(s)} for n, b, s in zip(names, beta, se)]


def _run_correction(fr, panel, fam, spec, fit_cfg):
    variant, L = spec["variant"], spec["bandwidth"]
    if variant.startswith("spj"):
        return (spj1 if variant == "spj1" else spj2)(panel, fam, fit_cfg, fr), None
    cfg = BcConfig(bandwidth=1 if L is None else L, abc_variant=variant)
    return {"abc1": abc1, "abc2": abc2, "abc3": abc3, "abc4": abc4}[variant](fr, cfg), cfg


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    fam = Family(args.family)
    if not args.regressor and not args.lag_outcome:
        raise UsageError("at least one --regressor or --lag-outcome is required")
    roles = ColumnRoles(args.outcome, args.indiv, args.time, tuple(args.regressor), args.lag_outcome)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        panel = read_panel_csv(args.input, roles, binary_outcome=fam.is_binary)
    t_read = time.perf_counter()
    fit_cfg = FitConfig()
    fr = fit(panel, fam, fit_cfg)
    t_fit = time.perf_counter()
    names = panel.regressor_names
    mle_ape = ape_for(fr, covariance=args.covariance, exogenous=args.exogenous)
    report = {
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata(args),
        "data": {
            "n_obs": panel.n_obs,
            "n_indiv": panel.n_indiv,
            "n_time": panel.n_time,
            "n_obs_used": fr.n_obs,
            "dropped": fr.dropped.to_dict(),
            "warnings": [str(w.message) for w in caught],
        },
        "family": args.family,
        "mle": {
            "coefficients": _coef_block(names, fr.beta, fr.se),
            "loglik": fr.loglik,
            "iterations": fr.iterations,
            "converged": fr.converged,
            "ape": _coef_block(names, mle_ape.estimate, mle_ape.se),
        },
        "corrections": [],
    }
    timings = {"read_s": t_read - t0, "fit_s": t_fit - t_read}
    for spec in args.corrections:
        t1 = time.perf_counter()
        bc, cfg = _run_correction(fr, panel, fam, spec, fit_cfg)
        a = ape_for(fr, bc, cfg, covariance=args.covariance, exogenous=args.exogenous)
        report["corrections"].append({
            "variant": bc.variant,
            "bandwidth": bc.bandwidth,
            "label": bc.label,
            "iterations": bc.iterations,
            "coefficients": _coef_block(names, bc.beta_corrected, bc.se),
            "bias_hat": [float(v) for v in bc.bias_hat],
            "ape": _coef_block(names, a.estimate, a.se),
        })
        timings[bc.label] = time.perf_counter() - t1
    report["covariance"] = args.covariance
    report["timings"] = None if args.reproducible else timings
    report["metadata"]["wall_time_s"] = None if args.reproducible else time.perf_counter() - t0
    _dump(report, args.output)
    return EXIT_OK


def _dgp_from_args(args) -> DgpConfig:
    kind = args.design.replace("-", "_")
    if args.pattern == "balanced":
        return DgpConfig(kind=kind, N=args.N, T=args.T)
    return DgpConfig(kind=kind, pattern=args.pattern, N1=args.N1, N2=args.N2, T1=args.T1, T2=args.T2)


def _default_estimators(kind: str) -> list[str]:
    if kind == "dynamic_linear":
        return ["LM", "BC(1)", "BC(2)"]
    return ["MLE", "ABC1(1)", "ABC1(2)", "SPJ1", "LPM(1)"]


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    try:
        cfg = _dgp_from_args(args)
        est = [e.strip() for e in args.estimators.split(",")] if args.estimators else _default_estimators(cfg.kind)
        specs = [parse_estimator(e) for e in est]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    threads = args.threads or default_threads()
    summ, draws = run_monte_carlo(cfg, specs, args.reps, args.seed, threads, keep_draws=True)
    out = {"schema_version": SCHEMA_VERSION, "metadata": metadata(args, args.seed), **summ.to_dict()}
    out["metadata"]["wall_time_s"] = None if args.reproducible else time.perf_counter() - t0
    if args.keep_draws:
        out["draws"] = [_draw_dict(r) for r in draws]
    if not args.output:
        _dump(out, None)
        return EXIT_OK
    _dump(out, args.output + ".json")
    with open(args.output + ".csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["estimator", "quantity", "param", "bias", "sd", "rmse", "se_sd", "cp95", "n"]
        w.writerow(cols + ["wald_size", "failures"])
        for row in summ.rows:
            d = row.to_dict()
            w.writerow([_cell(d[c]) for c in cols]
                       + [_cell(summ.wald_size.get(row.estimator)), summ.failures.get(row.estimator, 0)])
    if args.keep_draws:
        _write_draws(args.output + "_draws.csv", draws)
    return EXIT_OK


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if not np.isfinite(v) else repr(v)
    return v


def _draw_dict(r) -> dict:
    return {
        "rep": r.rep,
        "truth_coef": r.truth_coef,
        "truth_ape": r.truth_ape,
        "estimates": {k: {"coef": v.coef, "coef_se": v.coef_se, "ape": v.ape, "ape_se": v.ape_se,
                          "wald": v.wald} for k, v in r.records.items()},
        "failures": r.failures,
    }


def _write_draws(path, draws) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "estimator", "quantity", "param", "estimate", "se", "truth"])
        for r in draws:
            for label, rec in r.records.items():
                for q, est, se, tru in (("coef", rec.coef, rec.coef_se, r.truth_coef),
                                        ("ape", rec.ape, rec.ape_se, r.truth_ape)):
                    for j, name in enumerate(("y_lag", "x")):
                        w.writerow([r.rep, label, q, name, repr(float(est[j])), repr(float(se[j])),
                                    repr(float(tru[j]))])


def cmd_replicate_table(args) -> int:
    t0 = time.perf_counter()
    threads = args.threads or default_threads()

    def progress(spec, k, cfg):
        logger.info("table %d: design %d/%d (%s)", spec.table_id, k + 1, len(spec.designs), cfg.describe())

    res = replicate_table(args.table, args.reps, args.seed, threads, progress=progress)
    text = format_table(res)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json:
        out = {"schema_version": SCHEMA_VERSION, "metadata": metadata(args, args.seed), **res.to_dict()}
        out["metadata"]["wall_time_s"] = None if args.reproducible else time.perf_counter() - t0
        _dump(out, args.json)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "replicate-table": cmd_replicate_table}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, UnknownTable) as exc:
        print(f"panelbc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"panelbc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"panelbc: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PanelBCError as exc:
        print(f"panelbc: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"panelbc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
