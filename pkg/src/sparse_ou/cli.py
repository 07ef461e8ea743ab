"""Command line interface.

Subcommands: ``simulate`` (write a path bundle), ``estimate`` (fit one
estimator to a bundle), ``reproduce`` (run the full benchmark protocol) and
``theory`` (population quantities and empirical rate/concentration checks).

Exit codes: 0 success, 2 configuration or schema error, 3 file error,
4 numerical failure, 5 partial benchmark failure (fewer than 90 percent of
cells succeeded). Every command writes a manifest JSON recording the
resolved configuration, seed, timestamps and output files.
"""

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import NumericalError, UnsupportedInputError
from .experiments import (
    ExperimentPlan,
    export_figure_data,
    plan_from_dict,
    run_experiment,
    summarize,
)
from .model_select import CvGrid, cross_validate, report_to_csv, report_to_json, split_paths
from .process import (
    DriftMatrix,
    InitialLaw,
    bundle_to_csv,
    load_bundle,
    save_bundle,
    simulate_euler,
    simulate_exact,
)
from .solvers import result_to_json, solve_lasso, solve_mle, solve_slope
from .suffstats import compute_suffstats
from .theory import check_concentration, compute_c_infty, kl_between, rate_sweep
from .experiments import generate_drift


class CliError(Exception):
    """Carries an exit code and a user-facing message."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise CliError(3, "cannot read %s: %s" % (path, exc))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(
            2, "config error in %s at line %d column %d: %s" % (path, exc.lineno, exc.colno, exc.msg)
        )


def _require(config, field, path):
    if field not in config:
        raise CliError(2, "missing required field '%s' in %s" % (field, path))
    return config[field]


def _write_json(document, path):
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        json.dump(document, handle, sort_keys=True)
        handle.write("\n")


def _write_manifest(path, command, resolved_config, seed, started, outputs):
    _write_json(
        {
            "command": command,
            "resolved_config": resolved_config,
            "seed": seed,
            "started": started,
            "finished": _now(),
            "outputs": list(outputs),
            "version": __version__,
        },
        path,
    )


def _resolve_threads(args):
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise CliError(2, "--threads must be a positive integer")
        return args.threads
    env = os.environ.get("SPARSE_OU_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise CliError(2, "SPARSE_OU_THREADS must be an integer, got %r" % (env,))
        if value < 1:
            raise CliError(2, "SPARSE_OU_THREADS must be a positive integer")
        return value
    return os.cpu_count() or 1


def _drift_from_config(config, path):
    drift_config = _require(config, "drift", path)
    if not isinstance(drift_config, dict):
        raise CliError(2, "field 'drift' in %s must be an object" % (path,))
    if "matrix" in drift_config:
        entries = np.array(drift_config["matrix"], dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise CliError(2, "field 'drift.matrix' in %s must be square" % (path,))
        return DriftMatrix(entries.shape[0], entries)
    if "generator" in drift_config:
        generator = drift_config["generator"]
        dim = int(_require(generator, "dim", path + " (drift.generator)"))
        seed = int(_require(generator, "seed", path + " (drift.generator)"))
        scheme_keys = ("diag_low", "diag_high", "offdiag_zero_prob", "offdiag_low", "offdiag_high")
        overrides = {key: float(generator[key]) for key in scheme_keys if key in generator}
        plan = ExperimentPlan(dims=(max(dim, 2),), **overrides)
        return generate_drift(dim, plan, seed)
    raise CliError(2, "field 'drift' in %s needs either 'matrix' or 'generator'" % (path,))


def _law_from_config(config):
    law_config = config.get("law", {"kind": "zero"})
    kind = law_config.get("kind", "zero")
    covariance = law_config.get("covariance")
    return InitialLaw(
        kind=kind,
        covariance=None if covariance is None else np.array(covariance, dtype=float),
    )


def cmd_simulate(args):
    started = _now()
    config = _load_json(args.config)
    drift = _drift_from_config(config, args.config)
    law = _law_from_config(config)
    n_paths = int(_require(config, "n_paths", args.config))
    terminal = float(_require(config, "terminal", args.config))
    step = float(_require(config, "step", args.config))
    seed = int(_require(config, "seed", args.config))
    method = config.get("method", "euler")
    if method not in ("euler", "exact"):
        raise CliError(2, "field 'method' in %s must be 'euler' or 'exact'" % (args.config,))
    simulate = simulate_euler if method == "euler" else simulate_exact
    bundle = simulate(drift, law, n_paths, terminal, step, seed)
    save_bundle(bundle, args.out)
    outputs = [args.out]
    if args.csv:
        bundle_to_csv(bundle, args.csv)
        outputs.append(args.csv)
    resolved = dict(config)
    resolved["method"] = method
    _write_manifest(args.out + ".manifest.json", "simulate", resolved, seed, started, outputs)
    print("wrote %d paths (dim %d, grid %d) to %s" % (bundle.n_paths, bundle.dim, bundle.grid_len, args.out))
    return 0


def _parse_grid(text):
    if text == "default":
        return CvGrid.default()
    parts = text.split(":")
    if len(parts) != 3:
        raise CliError(2, "--grid expects 'default' or 'LOG10MIN:LOG10MAX:LOG10STEP', got %r" % (text,))
    try:
        low, high, step = (float(p) for p in parts)
    except ValueError:
        raise CliError(2, "--grid components must be numbers, got %r" % (text,))
    try:
        return CvGrid(log10_min=low, log10_max=high, log10_step=step)
    except ValueError as exc:
        raise CliError(2, "invalid --grid: %s" % (exc,))


def cmd_estimate(args):
    started = _now()
    bundle = load_bundle(args.bundle)
    if args.method == "mle" and (args.lam is not None or args.grid is not None):
        raise CliError(2, "method 'mle' takes neither --lambda nor --grid")
    if args.method in ("lasso", "slope"):
        if (args.lam is None) == (args.grid is None):
            raise CliError(2, "method %r needs exactly one of --lambda or --grid" % (args.method,))
    if args.lam is not None and args.lam < 0:
        raise CliError(2, "--lambda must be nonnegative")

    cv_report = None
    if args.method == "mle":
        stats = compute_suffstats(bundle)
        result = solve_mle(stats)
    elif args.grid is None:
        stats = compute_suffstats(bundle)
        if args.method == "lasso":
            result = solve_lasso(stats, args.lam)
        else:
            result = solve_slope(stats, args.lam)
    else:
        grid = _parse_grid(args.grid)
        n_train = args.n_train if args.n_train is not None else max(1, int(round(0.8 * bundle.n_paths)))
        if not (1 <= n_train < bundle.n_paths):
            raise CliError(2, "--n-train must be in [1, n_paths - 1], got %r" % (n_train,))
        train, valid = split_paths(bundle, n_train)
        penalty = "l1" if args.method == "lasso" else "sorted_l1"
        cv_report = cross_validate(
            compute_suffstats(train), compute_suffstats(valid), grid, penalty=penalty
        )
        result = cv_report.result

    document = {"estimator_result": result.to_dict(),
                "cv_report": None if cv_report is None else cv_report.to_dict()}
    _write_json(document, args.out)
    outputs = [args.out]
    if cv_report is not None:
        scores_path = args.out + ".cv.csv"
        report_to_csv(cv_report, scores_path)
        outputs.append(scores_path)
    resolved = {
        "bundle": args.bundle,
        "method": args.method,
        "lambda": args.lam,
        "grid": args.grid,
        "n_train": args.n_train,
    }
    _write_manifest(args.out + ".manifest.json", "estimate", resolved, bundle.seed, started, outputs)
    if cv_report is not None:
        print("chosen lambda %r (validation loss %r)"
              % (cv_report.chosen_lambda, dict(cv_report.scores)[cv_report.chosen_lambda]))
    print("estimate written to %s (converged=%s, iterations=%d)"
          % (args.out, result.converged, result.iterations))
    return 0


def cmd_reproduce(args):
    started = _now()
    plan_config = _load_json(args.plan) if args.plan else {}
    try:
        plan = plan_from_dict(plan_config)
    except (TypeError, ValueError) as exc:
        raise CliError(2, "invalid plan: %s" % (exc,))
    threads = _resolve_threads(args)
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        probe = os.path.join(args.out_dir, ".write_probe")
        with open(probe, "w") as handle:
            handle.write("")
        os.remove(probe)
    except OSError as exc:
        raise CliError(3, "output directory is not writable: %s" % (exc,))
    report = run_experiment(plan, threads=threads, verbose=True)
    outputs = export_figure_data(report, args.out_dir)
    timings = [
        {"d": row.dim, "replicate": row.replicate, "estimator": row.estimator,
         "runtime_seconds": row.runtime_seconds}
        for row in report.rows
    ]
    timings_path = os.path.join(args.out_dir, "timings.json")
    _write_json(timings, timings_path)
    outputs.append(timings_path)
    manifest_path = os.path.join(args.out_dir, "manifest.json")
    _write_manifest(manifest_path, "reproduce", plan.to_dict(), plan.master_seed, started, outputs)
    for line in summarize(report):
        print(line)
    cells = {}
    for row in report.rows:
        cells.setdefault((row.dim, row.replicate), True)
        if row.status != "ok":
            cells[(row.dim, row.replicate)] = False
    succeeded = sum(1 for ok in cells.values() if ok)
    fraction = succeeded / len(cells)
    if fraction < 0.9:
        print("only %.1f%% of cells succeeded" % (100.0 * fraction), file=sys.stderr)
        return 5
    return 0


def _theory_drift(document, field, path):
    entries = np.array(_require(document, field, path), dtype=float)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise CliError(2, "field '%s' in %s must be a square matrix" % (field, path))
    return DriftMatrix(entries.shape[0], entries)


def cmd_theory(args):
    started = _now()
    config = _load_json(args.config)
    outputs = [args.out]
    seed = config.get("seed")

    if args.operation == "cinfty":
        drift = _theory_drift(config, "drift", args.config)
        sigma = config.get("sigma")
        quantities = compute_c_infty(
            drift,
            sigma=None if sigma is None else np.array(sigma, dtype=float),
            terminal=float(config.get("terminal", 1.0)),
        )
        _write_json(quantities.to_dict(), args.out)
        print("c_infty[0,0] = %r" % (float(quantities.c_infty[0, 0]),))
        print("kappa_min = %r, kappa_max = %r, kappa_star = %r"
              % (quantities.kappa_min, quantities.kappa_max, quantities.kappa_star))
    elif args.operation == "concentration":
        drift = _theory_drift(config, "drift", args.config)
        law = _law_from_config(config)
        points = check_concentration(
            drift,
            law,
            [int(n) for n in _require(config, "n_list", args.config)],
            int(_require(config, "reps", args.config)),
            int(_require(config, "seed", args.config)),
            terminal=float(config.get("terminal", 1.0)),
            step=float(config.get("step", 0.01)),
            sampler=config.get("sampler", "exact"),
        )
        _write_json(
            [
                {"n_paths": p.n_paths, "mean_deviation": p.mean_deviation,
                 "sandwich_frequency": p.sandwich_frequency}
                for p in points
            ],
            args.out,
        )
        csv_path = args.out + ".csv"
        with open(csv_path, "w", encoding="ascii", newline="\n") as handle:
            handle.write("n_paths,mean_deviation,sandwich_frequency\n")
            for p in points:
                handle.write("%d,%s,%s\n"
                             % (p.n_paths, repr(p.mean_deviation), repr(p.sandwich_frequency)))
        outputs.append(csv_path)
        for p in points:
            print("N=%d mean operator deviation %r sandwich frequency %r"
                  % (p.n_paths, p.mean_deviation, p.sandwich_frequency))
    elif args.operation == "rate":
        try:
            plan = plan_from_dict(config.get("plan", {}))
        except (TypeError, ValueError) as exc:
            raise CliError(2, "invalid plan: %s" % (exc,))
        report = rate_sweep(
            config.get("axis", "N"),
            plan,
            [int(n) for n in _require(config, "points", args.config)],
            int(_require(config, "reps", args.config)),
            p=int(config.get("p", 2)),
            penalty=config.get("penalty", "l1"),
        )
        _write_json(report.to_dict(), args.out)
        seed = plan.master_seed
        print("fitted exponent %r (expected %r)" % (report.fitted_exponent, report.expected_exponent))
    elif args.operation == "kl":
        a1 = np.array(_require(config, "a1", args.config), dtype=float)
        a2 = np.array(_require(config, "a2", args.config), dtype=float)
        value = kl_between(a1, a2, int(_require(config, "n_paths", args.config)),
                           terminal=float(config.get("terminal", 1.0)))
        _write_json({"kl": value}, args.out)
        print("kl = %r" % (value,))
    else:
        raise CliError(2, "unknown theory operation %r" % (args.operation,))

    _write_manifest(args.out + ".manifest.json", "theory " + args.operation, config, seed,
                    started, outputs)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparse-ou",
        description="Sparse drift estimation for linear diffusions observed as repeated paths.",
    )
    parser.add_argument("--version", action="version", version="sparse-ou " + __version__)
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="simulate a path bundle")
    simulate.add_argument("--config", required=True, help="JSON simulation config")
    simulate.add_argument("--out", required=True, help="output bundle file")
    simulate.add_argument("--csv", default=None, help="optional CSV export of the paths")
    simulate.set_defaults(func=cmd_simulate)

    estimate = commands.add_parser("estimate", help="fit a drift estimator to a bundle")
    estimate.add_argument("--bundle", required=True, help="input bundle file")
    estimate.add_argument("--method", required=True, choices=("mle", "lasso", "slope"))
    estimate.add_argument("--lambda", dest="lam", type=float, default=None,
                          help="fixed regularization level")
    estimate.add_argument("--grid", default=None,
                          help="'default' or LOG10MIN:LOG10MAX:LOG10STEP hold-out grid")
    estimate.add_argument("--n-train", dest="n_train", type=int, default=None,
                          help="training paths for hold-out selection (default 80 percent)")
    estimate.add_argument("--out", required=True, help="output JSON result")
    estimate.set_defaults(func=cmd_estimate)

    reproduce = commands.add_parser("reproduce", help="run the benchmark protocol")
    reproduce.add_argument("--plan", default=None, help="JSON plan (defaults fill missing fields)")
    reproduce.add_argument("--out-dir", required=True, help="output directory")
    reproduce.add_argument("--threads", type=int, default=None,
                           help="worker processes (default: SPARSE_OU_THREADS or all cores)")
    reproduce.set_defaults(func=cmd_reproduce)

    theory = commands.add_parser("theory", help="population quantities and empirical checks")
    theory.add_argument("operation", choices=("cinfty", "concentration", "rate", "kl"))
    theory.add_argument("--config", required=True, help="JSON config for the operation")
    theory.add_argument("--out", required=True, help="output JSON report")
    theory.set_defaults(func=cmd_theory)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else int(exc.code)
    try:
        return args.func(args)
    except CliError as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return exc.code
    except UnsupportedInputError as exc:
        print("error: unsupported input: %s" % (exc,), file=sys.stderr)
        return 2
    except ValueError as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return 2
    except NumericalError as exc:
        print("error: numerical failure: %s" % (exc,), file=sys.stderr)
        return 4
    except OSError as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return 3


def entry():
    sys.exit(main())
