"""Benchmark protocol comparing the three estimators across dimensions.

For each dimension ``d`` a single sparse drift is drawn and reused across
replicates. Every replicate simulates fresh paths, splits them into a
training prefix and validation suffix, fits the unpenalized estimator on the
training statistics and the two penalized estimators with hold-out selection
of the level, and records scaled errors plus support recovery.

Seeding is fully deterministic: the drift for dimension ``d`` uses
``mix_seed(master_seed, 1, d)`` and the paths of replicate ``r`` use
``mix_seed(master_seed, 2, d, r)``, so any subset of cells can be reproduced
in isolation and results do not depend on execution order or thread count.
"""

import concurrent.futures
import dataclasses
import os
import sys
import time

import numpy as np

from .model_select import CvGrid, cross_validate, split_paths
from .process import DriftMatrix, InitialLaw, mix_seed, path_stream, simulate_euler
from .solvers import SolverConfig, solve_mle
from .suffstats import compute_suffstats

_ESTIMATORS = ("mle", "lasso", "slope")

_HEATMAP_NAMES = ("truth", "mle", "lasso", "slope")


@dataclasses.dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """Configuration of one full benchmark run.

    Defaults give the full comparison: dimensions 5 through 25, ten
    replicates, 500 paths per replicate (400 training, 100 validation) on
    the unit horizon with spacing 0.01, and the sparse drift scheme with
    uniform diagonal in [-1, 1] and off-diagonal entries zero with
    probability 0.8 otherwise uniform in [-0.5, 0.5]. The selection grid
    spans the levels at which the penalties are actually active for these
    sample sizes.
    """

    dims: tuple = tuple(range(5, 26))
    replicates: int = 10
    n_paths: int = 500
    n_train: int = 400
    terminal: float = 1.0
    step: float = 0.01
    master_seed: int = 20260815
    grid: CvGrid = CvGrid(log10_min=-3.0, log10_max=0.0, log10_step=0.25)
    diag_low: float = -1.0
    diag_high: float = 1.0
    offdiag_zero_prob: float = 0.8
    offdiag_low: float = -0.5
    offdiag_high: float = 0.5
    heatmap_dims: tuple = (15,)
    initial_law: InitialLaw = InitialLaw(kind="zero")
    support_threshold: float = 1e-6
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise ValueError("dims must be a nonempty collection of integers >= 2")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "heatmap_dims", tuple(int(d) for d in self.heatmap_dims))
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if not (1 <= self.n_train < self.n_paths):
            raise ValueError("n_train must be in [1, n_paths - 1]")
        if self.diag_low > self.diag_high or self.offdiag_low > self.offdiag_high:
            raise ValueError("interval bounds are reversed")
        if not (0.0 <= self.offdiag_zero_prob <= 1.0):
            raise ValueError("offdiag_zero_prob must be in [0, 1]")
        if self.support_threshold <= 0:
            raise ValueError("support_threshold must be positive")

    def to_dict(self):
        return {
            "dims": list(self.dims),
            "replicates": self.replicates,
            "n_paths": self.n_paths,
            "n_train": self.n_train,
            "terminal": self.terminal,
            "step": self.step,
            "master_seed": self.master_seed,
            "grid": {
                "log10_min": self.grid.log10_min,
                "log10_max": self.grid.log10_max,
                "log10_step": self.grid.log10_step,
            },
            "diag_low": self.diag_low,
            "diag_high": self.diag_high,
            "offdiag_zero_prob": self.offdiag_zero_prob,
            "offdiag_low": self.offdiag_low,
            "offdiag_high": self.offdiag_high,
            "heatmap_dims": list(self.heatmap_dims),
            "initial_law": {
                "kind": self.initial_law.kind,
                "covariance": None
                if self.initial_law.covariance is None
                else [[float(v) for v in row] for row in self.initial_law.covariance],
            },
            "support_threshold": self.support_threshold,
            "solver": {
                "max_iters": self.solver.max_iters,
                "rel_tol": self.solver.rel_tol,
                "step_rule": self.solver.step_rule,
                "backtracking_factor": self.solver.backtracking_factor,
            },
        }


def plan_from_dict(document):
    """Build a plan from a JSON-style dict, filling defaults for missing keys."""
    if not isinstance(document, dict):
        raise ValueError("plan must be a JSON object")
    known = {
        "dims", "replicates", "n_paths", "n_train", "terminal", "step", "master_seed",
        "grid", "diag_low", "diag_high", "offdiag_zero_prob", "offdiag_low",
        "offdiag_high", "heatmap_dims", "initial_law", "support_threshold", "solver",
    }
    unknown = set(document) - known
    if unknown:
        raise ValueError("unknown plan fields: %s" % (", ".join(sorted(unknown)),))
    kwargs = {}
    for key in ("dims", "heatmap_dims"):
        if key in document:
            kwargs[key] = tuple(document[key])
    for key in ("replicates", "n_paths", "n_train", "master_seed"):
        if key in document:
            kwargs[key] = int(document[key])
    for key in ("terminal", "step", "diag_low", "diag_high", "offdiag_zero_prob",
                "offdiag_low", "offdiag_high", "support_threshold"):
        if key in document:
            kwargs[key] = float(document[key])
    if "grid" in document:
        grid = document["grid"]
        kwargs["grid"] = CvGrid(
            log10_min=float(grid["log10_min"]),
            log10_max=float(grid["log10_max"]),
            log10_step=float(grid["log10_step"]),
        )
    if "initial_law" in document:
        law = document["initial_law"]
        covariance = law.get("covariance")
        kwargs["initial_law"] = InitialLaw(
            kind=law.get("kind", "zero"),
            covariance=None if covariance is None else np.array(covariance, dtype=float),
        )
    if "solver" in document:
        solver = dict(document["solver"])
        kwargs["solver"] = SolverConfig(
            max_iters=int(solver.get("max_iters", 5000)),
            rel_tol=float(solver.get("rel_tol", 1e-8)),
            step_rule=solver.get("step_rule", "fixed_inverse_lipschitz"),
            backtracking_factor=float(solver.get("backtracking_factor", 0.5)),
        )
    return ExperimentPlan(**kwargs)


@dataclasses.dataclass(frozen=True, eq=False)
class ExperimentRow:
    """Metrics of one estimator in one (dimension, replicate) cell."""

    dim: int
    replicate: int
    estimator: str
    scaled_l2sq: float
    scaled_l1: float
    support_f1: float
    lambda_used: float
    runtime_seconds: float
    status: str


@dataclasses.dataclass(frozen=True, eq=False)
class HeatmapRecord:
    dim: int
    replicate: int
    name: str
    matrix: np.ndarray


@dataclasses.dataclass(frozen=True, eq=False)
class ExperimentReport:
    plan: ExperimentPlan
    rows: list
    heatmaps: list
    drifts: dict


def generate_drift(dim, plan, seed):
    """Draw the sparse drift used by one dimension of the benchmark.

    Diagonal entries are uniform in ``[diag_low, diag_high]``; each
    off-diagonal entry is zero with probability ``offdiag_zero_prob`` and
    otherwise uniform in ``[offdiag_low, offdiag_high]``. Deterministic for
    a fixed ``(seed, dim)``.
    """
    if dim < 2:
        raise ValueError("dim must be at least 2")
    gen = path_stream(seed, dim)
    entries = np.zeros((dim, dim))
    diag = gen.uniform(plan.diag_low, plan.diag_high, size=dim)
    keep = gen.random(size=(dim, dim)) >= plan.offdiag_zero_prob
    values = gen.uniform(plan.offdiag_low, plan.offdiag_high, size=(dim, dim))
    off_mask = ~np.eye(dim, dtype=bool)
    entries[off_mask & keep] = values[off_mask & keep]
    entries[np.diag_indices(dim)] = diag
    support = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(entries)))
    return DriftMatrix(dim, entries, true_support=support)


def support_f1(estimate, true_support, threshold):
    """F1 score of the recovered support at a magnitude threshold."""
    found = {(int(i), int(j)) for i, j in zip(*np.nonzero(np.abs(estimate) > threshold))}
    truth = set(true_support)
    if not found and not truth:
        return 1.0
    tp = len(found & truth)
    denominator = 2 * tp + len(found - truth) + len(truth - found)
    return 2.0 * tp / denominator if denominator else 0.0


def _metric_rows(dim, replicate, name, estimate, drift, lambda_used, runtime, threshold):
    delta = estimate - drift.entries
    return ExperimentRow(
        dim=dim,
        replicate=replicate,
        estimator=name,
        scaled_l2sq=float(np.sum(delta * delta)) / dim,
        scaled_l1=float(np.sum(np.abs(delta))) / dim,
        support_f1=support_f1(estimate, drift.true_support or frozenset(), threshold),
        lambda_used=lambda_used,
        runtime_seconds=runtime,
        status="ok",
    )


def _failed_row(dim, replicate, name, runtime, exc):
    return ExperimentRow(
        dim=dim,
        replicate=replicate,
        estimator=name,
        scaled_l2sq=float("nan"),
        scaled_l1=float("nan"),
        support_f1=float("nan"),
        lambda_used=float("nan"),
        runtime_seconds=runtime,
        status="failed: %s" % (exc,),
    )


def _run_cell(plan, drift, dim, replicate):
    paths = simulate_euler(
        drift, plan.initial_law, plan.n_paths, plan.terminal, plan.step,
        mix_seed(plan.master_seed, 2, dim, replicate),
    )
    train, valid = split_paths(paths, plan.n_train)
    train_stats = compute_suffstats(train)
    valid_stats = compute_suffstats(valid)
    rows = []
    estimates = {"truth": drift.entries}
    for name in _ESTIMATORS:
        begin = time.perf_counter()
        try:
            if name == "mle":
                fit = solve_mle(train_stats)
                lambda_used = float("nan")
            else:
                penalty = "l1" if name == "lasso" else "sorted_l1"
                report = cross_validate(
                    train_stats, valid_stats, plan.grid, penalty=penalty, config=plan.solver
                )
                fit = report.result
                lambda_used = report.chosen_lambda
        except Exception as exc:  # keep the sweep alive, mark the cell
            rows.append(_failed_row(dim, replicate, name, time.perf_counter() - begin, exc))
            continue
        runtime = time.perf_counter() - begin
        estimates[name] = fit.estimate.entries
        rows.append(
            _metric_rows(dim, replicate, name, fit.estimate.entries, drift,
                         lambda_used, runtime, plan.support_threshold)
        )
    heatmaps = []
    if dim in plan.heatmap_dims:
        for name in _HEATMAP_NAMES:
            if name in estimates:
                heatmaps.append(HeatmapRecord(dim, replicate, name, np.array(estimates[name])))
    return rows, heatmaps


def _cell_task(args):
    return _run_cell(*args)


def run_experiment(plan, threads=1, verbose=False):
    """Execute the benchmark described by ``plan``.

    Parameters
    ----------
    plan : ExperimentPlan
    threads : int
        Worker processes for independent (dimension, replicate) cells.
        Results are assembled in a fixed order, so any value yields
        identical output.
    verbose : bool
        Print one progress line per dimension to stderr.

    Returns
    -------
    ExperimentReport
    """
    drifts = {
        dim: generate_drift(dim, plan, mix_seed(plan.master_seed, 1, dim))
        for dim in plan.dims
    }
    cells = [(plan, drifts[dim], dim, replicate)
             for dim in plan.dims for replicate in range(plan.replicates)]
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(int(threads), len(cells)))
    outcomes = {}
    if threads == 1:
        for plan_, drift, dim, replicate in cells:
            outcomes[(dim, replicate)] = _run_cell(plan_, drift, dim, replicate)
            if verbose and replicate == plan.replicates - 1:
                print("dim %d done" % dim, file=sys.stderr)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            for (_, _, dim, replicate), outcome in zip(cells, pool.map(_cell_task, cells)):
                outcomes[(dim, replicate)] = outcome
                if verbose and replicate == plan.replicates - 1:
                    print("dim %d done" % dim, file=sys.stderr)
    rows = []
    heatmaps = []
    for dim in plan.dims:
        for replicate in range(plan.replicates):
            cell_rows, cell_maps = outcomes[(dim, replicate)]
            rows.extend(cell_rows)
            heatmaps.extend(cell_maps)
    return ExperimentReport(plan=plan, rows=rows, heatmaps=heatmaps, drifts=drifts)


def display_transform(matrix):
    """Signed log compression ``sign(x) * log(1 + |x| / 0.01)`` for heatmaps."""
    values = np.asarray(matrix, dtype=float)
    return np.sign(values) * np.log1p(np.abs(values) / 0.01)


def _write_matrix_csv(matrix, path):
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        for row in matrix:
            handle.write(",".join(repr(float(v)) for v in row))
            handle.write("\n")


def export_figure_data(report, out_dir):
    """Write benchmark CSVs under ``out_dir`` and return the file list.

    Outputs: ``rows.csv`` with every per-cell metric, one
    ``curve_<metric>_<estimator>.csv`` per error metric and estimator with
    columns (d, mean, std) over successful replicates, and raw plus
    display-transformed heatmap matrices. All content is deterministic for a
    fixed report.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    rows_path = os.path.join(out_dir, "rows.csv")
    with open(rows_path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("d,replicate,estimator,scaled_l2sq,scaled_l1,support_f1,lambda,status\n")
        for row in report.rows:
            handle.write(
                "%d,%d,%s,%s,%s,%s,%s,%s\n"
                % (
                    row.dim, row.replicate, row.estimator,
                    repr(float(row.scaled_l2sq)), repr(float(row.scaled_l1)),
                    repr(float(row.support_f1)), repr(float(row.lambda_used)),
                    '"%s"' % row.status.replace('"', "'"),
                )
            )
    written.append(rows_path)

    for metric in ("scaled_l2sq", "scaled_l1"):
        for estimator in _ESTIMATORS:
            path = os.path.join(out_dir, "curve_%s_%s.csv" % (metric, estimator))
            with open(path, "w", encoding="ascii", newline="\n") as handle:
                handle.write("d,mean,std\n")
                for dim in report.plan.dims:
                    values = [
                        getattr(row, metric)
                        for row in report.rows
                        if row.dim == dim and row.estimator == estimator and row.status == "ok"
                    ]
                    if values:
                        mean = float(np.mean(values))
                        std = float(np.std(values))
                    else:
                        mean = std = float("nan")
                    handle.write("%d,%s,%s\n" % (dim, repr(mean), repr(std)))
            written.append(path)

    for record in report.heatmaps:
        base = "heatmap_d%d_rep%d_%s" % (record.dim, record.replicate, record.name)
        raw_path = os.path.join(out_dir, base + ".csv")
        _write_matrix_csv(record.matrix, raw_path)
        written.append(raw_path)
        display_path = os.path.join(out_dir, base + "_display.csv")
        _write_matrix_csv(display_transform(record.matrix), display_path)
        written.append(display_path)

    return written


def summarize(report):
    """Per-dimension mean scaled errors as aligned text lines."""
    lines = ["  d   mle l2^2/d   lasso l2^2/d  slope l2^2/d    mle l1/d   lasso l1/d   slope l1/d"]
    for dim in report.plan.dims:
        cells = []
        for metric in ("scaled_l2sq", "scaled_l1"):
            for estimator in _ESTIMATORS:
                values = [
                    getattr(row, metric)
                    for row in report.rows
                    if row.dim == dim and row.estimator == estimator and row.status == "ok"
                ]
                cells.append(np.mean(values) if values else float("nan"))
        lines.append(
            "%3d   %10.5f   %10.5f   %10.5f   %10.5f   %10.5f   %10.5f"
            % (dim, cells[0], cells[1], cells[2], cells[3], cells[4], cells[5])
        )
    return lines
