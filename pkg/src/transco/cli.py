"""Command-line entry point: ``transco fit|tune|simulate|generate|evaluate``.

Exit codes: 0 success, 1 numerical failure, 2 invalid input.
Set ``TRANSCO_LOG`` to ``off`` (default), ``info`` or ``debug``.
"""
import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .baselines import ols_fit, ptl_fit
from .dataio import (FLOAT_FMT, ResultRecord, load_dataset_csv, load_experiment_config,
                     write_dataset_csv, write_results)
from .errors import InvalidParameterError, TranscoError, UndefinedMetricError
from .ipod import Dataset, ipod_bic_path
from .metrics import f1_detection, huber_loss, mse_beta, r_squared
from .simgen import gen_problem, trial_seed
from .transfer import fit_sources, transco_bic_path

log = logging.getLogger("transco")

EXIT_OK, EXIT_NUMERIC, EXIT_INVALID = 0, 1, 2
METHOD_NAMES = {"ipod": "IPOD", "transco": "TransCO", "ptl": "PTL", "ols": "OLS"}


class UsageError(InvalidParameterError):
    pass


def setup_logging():
    level = os.environ.get("TRANSCO_LOG", "off").strip().lower()
    levels = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        level = "off"
    logging.basicConfig(level=levels[level], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("transco").setLevel(levels[level])


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load_problem(args, need_sources):
    target = load_dataset_csv(args.data, args.response, args.standardize)
    sources = [load_dataset_csv(p, args.response, args.standardize) for p in (args.sources or [])]
    if need_sources and not sources:
        raise UsageError(f"--sources is required for --method {args.method}")
    for k, s in enumerate(sources):
        if s.columns != target.columns:
            raise UsageError(f"--sources[{k}] ({args.sources[k]}): columns differ from --data")
    return target, sources


def _floats(v):
    return [float(x) for x in np.asarray(v).ravel()]


def _path_summary(path):
    return {"grid_size": len(path.lambdas), "best_index": path.best_index,
            "best_lambda": path.best_lambda, "best_bic": float(path.bic[path.best_index]),
            "df": [int(d) for d in path.df]}


def _fit(method, target, sources, grid_size, tol, max_iter):
    """Fit one method; returns (beta_hat, gamma_hat or None, report dict)."""
    if method == "ols":
        beta = ols_fit(target.X, target.Y)
        return beta, None, {}
    if method == "ipod":
        path, fit = ipod_bic_path(target, grid_size=grid_size, tol=tol,
                                  max_iter=min(max_iter, 500))
        return fit.beta_hat, fit.gamma_hat, {
            "lambda": fit.lambda_adj, "iterations": fit.iterations, "converged": fit.converged,
            "bic_path": _path_summary(path)}
    ensemble = fit_sources(sources, grid_size=grid_size, tol=tol)
    if method == "ptl":
        return ptl_fit(target, ensemble), None, {}
    path, fit = transco_bic_path(target, ensemble, grid_size=grid_size, tol=tol, max_iter=max_iter)
    return fit.beta_hat, fit.gamma_hat, {
        "lambda": fit.lam, "iterations": fit.iterations, "converged": fit.converged,
        "w_hat": _floats(fit.w_hat), "delta_hat": _floats(fit.delta_hat),
        "bic_path": _path_summary(path)}


def _write_json(path, obj):
    text = json.dumps(obj, indent=1, allow_nan=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args):
    target, sources = _load_problem(args, args.method in ("transco", "ptl"))
    beta, gamma, extra = _fit(args.method, target, sources, args.grid_size, args.tol,
                              args.max_iter)
    report = {"method": args.method, "n": target.n, "p": target.p,
              "columns": target.columns, "beta_hat": _floats(beta)}
    if gamma is not None:
        idx = np.flatnonzero(gamma)
        report["detected"] = [{"index": int(i), "gamma": float(gamma[i])} for i in idx]
    report.update(extra)
    _write_json(args.out, report)
    return EXIT_OK


def cmd_tune(args):
    target, sources = _load_problem(args, args.method == "transco")
    if args.method == "ipod":
        path, _ = ipod_bic_path(target, grid_size=args.grid_size, tol=args.tol,
                                max_iter=min(args.max_iter, 500))
    else:
        ensemble = fit_sources(sources, grid_size=args.grid_size, tol=args.tol)
        path, _ = transco_bic_path(target, ensemble, grid_size=args.grid_size, tol=args.tol,
                                   max_iter=args.max_iter)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "lambda", "df", "rss", "bic"])
        for i, row in enumerate(path.rows()):
            w.writerow([i, format(row["lambda"], FLOAT_FMT), row["df"],
                        format(row["rss"], FLOAT_FMT), format(row["bic"], FLOAT_FMT)])
    _write_json("-", {"best_index": path.best_index, "best_lambda": path.best_lambda})
    return EXIT_OK


def run_trial(exp, trial, methods):
    """Generate one problem, fit ``methods`` and score them; pure given inputs."""
    cfg = exp.simulation
    target, sources, truth = gen_problem(cfg, trial_seed(cfg.seed, trial))
    digest = cfg.digest()
    ensemble = None
    records = []
    for m in methods:
        if m in ("transco", "ptl") and ensemble is None:
            ensemble = fit_sources(sources, grid_size=exp.grid_size, tol=exp.tol)
        f1 = None
        if m == "ipod":
            _, fit = ipod_bic_path(target, grid_size=exp.grid_size, tol=exp.tol,
                                   max_iter=min(exp.max_iter, 500))
            beta, f1 = fit.beta_hat, f1_detection(fit.detected, truth.outliers_target).f1
        elif m == "transco":
            _, fit = transco_bic_path(target, ensemble, grid_size=exp.grid_size, tol=exp.tol,
                                      max_iter=exp.max_iter)
            beta, f1 = fit.beta_hat, f1_detection(fit.detected, truth.outliers_target).f1
        elif m == "ptl":
            beta = ptl_fit(target, ensemble)
        else:
            beta = ols_fit(target.X, target.Y)
        records.append(ResultRecord(method=METHOD_NAMES[m], trial=trial, config_digest=digest,
                                    mse=mse_beta(beta, truth.beta), f1=f1, seed=cfg.seed,
                                    n=cfg.n))
    return records


def _parse_methods(text):
    methods = [m.strip().lower() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHOD_NAMES]
    if bad or not methods:
        raise UsageError(f"--methods: unknown method(s) {bad}; choose from {sorted(METHOD_NAMES)}")
    return list(dict.fromkeys(methods))


def cmd_simulate(args):
    exp = load_experiment_config(args.config)
    if args.seed is not None:
        exp.simulation = exp.simulation.replace(seed=args.seed)
    trials = exp.trials if args.trials is None else args.trials
    if trials < 1:
        raise UsageError(f"--trials must be >= 1, got {trials}")
    if args.parallel < 1:
        raise UsageError(f"--parallel must be >= 1, got {args.parallel}")
    methods = _parse_methods(args.methods)
    os.makedirs(args.out, exist_ok=True)
    if args.parallel == 1:
        batches = [run_trial(exp, t, methods) for t in range(trials)]
    else:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            futures = [pool.submit(run_trial, exp, t, methods) for t in range(trials)]
            batches = [f.result() for f in futures]
    order = {METHOD_NAMES[m]: i for i, m in enumerate(methods)}
    records = sorted((r for b in batches for r in b), key=lambda r: (r.trial, order[r.method]))
    write_results(os.path.join(args.out, "records.csv"), records, "csv")
    with open(os.path.join(args.out, "plot_data.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "n", "trial", "log_mse"])
        for r in records:
            w.writerow([r.method, r.n, r.trial, format(r.log_mse, FLOAT_FMT)])
    log.info("wrote %d records to %s", len(records), args.out)
    return EXIT_OK


def cmd_generate(args):
    exp = load_experiment_config(args.config)
    cfg = exp.simulation if args.seed is None else exp.simulation.replace(seed=args.seed)
    target, sources, truth = gen_problem(cfg, trial_seed(cfg.seed, args.trial))
    os.makedirs(args.out, exist_ok=True)
    write_dataset_csv(os.path.join(args.out, "target.csv"), target)
    for k, s in enumerate(sources, start=1):
        write_dataset_csv(os.path.join(args.out, f"source{k}.csv"), s)
    _write_json(os.path.join(args.out, "truth.json"), {
        "beta": _floats(truth.beta), "w": _floats(truth.w), "delta": _floats(truth.delta),
        "outliers_target": [int(i) for i in truth.outliers_target],
        "config_digest": cfg.digest(), "trial": args.trial, "seed": cfg.seed})
    return EXIT_OK


def _predict(method, train, sources, args):
    beta, _, _ = _fit(method, train, sources, args.grid_size, args.tol, args.max_iter)
    return beta


def cmd_evaluate(args):
    """Random train/test split; Huber loss and R^2 on the held-out rows."""
    if not 0.0 < args.test_fraction < 1.0:
        raise UsageError(f"--test-fraction must lie in (0, 1), got {args.test_fraction}")
    target, sources = _load_problem(args, args.method in ("transco", "ptl"))
    rng = np.random.default_rng(args.seed)
    perm = rng.permutation(target.n)
    n_test = int(round(args.test_fraction * target.n))
    if n_test < 2 or target.n - n_test < 2:
        raise UsageError(f"--test-fraction {args.test_fraction} leaves too few rows")
    test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    tr = Dataset(target.X[train], target.Y[train], target.columns, target.response)
    beta = _predict(args.method, tr, sources, args)
    y_hat = target.X[test] @ beta
    report = {"method": args.method, "n_train": int(train.size), "n_test": int(test.size),
              "huber": huber_loss(target.Y[test], y_hat, args.alpha), "alpha": args.alpha}
    try:
        r2 = r_squared(target.Y[test], y_hat)
        report["r2"] = r2
        report["r2_negative"] = bool(r2 < 0)
    except UndefinedMetricError as exc:
        report["r2"] = None
        report["r2_note"] = str(exc)
    _write_json(args.out, report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _data_flags(p, methods):
    p.add_argument("--data", required=True, help="target CSV with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--method", required=True, choices=methods)
    p.add_argument("--sources", nargs="+", default=[], metavar="CSV")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--grid-size", type=int, default=40)


def build_parser():
    parser = argparse.ArgumentParser(prog="transco", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one method and write a JSON report")
    _data_flags(p, sorted(METHOD_NAMES))
    p.add_argument("--out", default="-", help="report path (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="write the BIC* tuning path as CSV")
    _data_flags(p, ["ipod", "transco"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="Monte-Carlo benchmark over a config")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--methods", default="ipod,transco,ptl")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="write one simulated problem as CSV files")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="held-out Huber loss and R^2")
    _data_flags(p, sorted(METHOD_NAMES))
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        for flag in ("tol",):
            if hasattr(args, flag) and not getattr(args, flag) > 0:
                raise UsageError(f"--{flag} must be > 0")
        for flag in ("max_iter", "grid_size"):
            if hasattr(args, flag) and getattr(args, flag) < (2 if flag == "grid_size" else 1):
                raise UsageError(f"--{flag.replace('_', '-')} is too small: {getattr(args, flag)}")
        return args.func(args)
    except (InvalidParameterError, ValueError) as exc:
        print(f"transco {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TranscoError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"transco {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"transco {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
