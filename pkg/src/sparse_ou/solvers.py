"""Drift estimators built on the sufficient statistics.

Three estimators share the quadratic loss ``0.5 tr(A c_hat A^T) - <A, b_hat>``:

* ``solve_mle``: unpenalized minimizer ``b_hat c_hat^{-1}`` via a linear solve.
* ``solve_lasso``: adds ``lambda * ||A||_1`` (entrywise l1).
* ``solve_slope``: adds ``lambda * sorted-l1`` with nonincreasing weights.

The penalized problems run accelerated proximal gradient iterations with a
fixed step ``1/L``, ``L`` the top eigenvalue of ``c_hat`` (the exact
Lipschitz constant of the gradient), in a monotone variant: whenever the
accelerated candidate raises the objective the momentum is restarted and a
plain proximal step from the current iterate is taken instead.
"""

import dataclasses
import json
import math

import numpy as np

from .errors import NumericalError
from .process import DriftMatrix
from .prox import WeightVector, prox_l1, prox_sorted_l1, slope_weights, sorted_l1_norm
from .suffstats import SuffStats

_STEP_RULES = ("fixed_inverse_lipschitz", "backtracking")


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Iteration budget and stopping tolerances for the proximal solvers.

    Convergence requires both a relative objective decrease below
    ``rel_tol`` and a proximal fixed-point residual below
    ``rel_tol * (1 + ||A||_inf)``; ``max_iters`` always caps the loop.
    """

    max_iters: int = 5000
    rel_tol: float = 1e-8
    step_rule: str = "fixed_inverse_lipschitz"
    backtracking_factor: float = 0.5

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not (0 < self.rel_tol < 1):
            raise ValueError("rel_tol must be in (0, 1)")
        if self.step_rule not in _STEP_RULES:
            raise ValueError("step_rule must be one of %r" % (_STEP_RULES,))
        if not (0 < self.backtracking_factor < 1):
            raise ValueError("backtracking_factor must be in (0, 1)")


@dataclasses.dataclass(frozen=True, eq=False)
class EstimatorResult:
    """Fitted drift plus the solve trace."""

    estimate: DriftMatrix
    objective_history: list
    iterations: int
    converged: bool
    lambda_used: float
    penalty_kind: str

    def to_dict(self):
        return {
            "estimate": [[float(v) for v in row] for row in self.estimate.entries],
            "dim": self.estimate.dim,
            "objective_history": [float(v) for v in self.objective_history],
            "iterations": self.iterations,
            "converged": self.converged,
            "lambda_used": self.lambda_used,
            "penalty_kind": self.penalty_kind,
        }

    @staticmethod
    def from_dict(document):
        entries = np.array(document["estimate"], dtype=float)
        return EstimatorResult(
            estimate=DriftMatrix(int(document["dim"]), entries),
            objective_history=[float(v) for v in document["objective_history"]],
            iterations=int(document["iterations"]),
            converged=bool(document["converged"]),
            lambda_used=None if document["lambda_used"] is None else float(document["lambda_used"]),
            penalty_kind=str(document["penalty_kind"]),
        )


def result_to_json(result, path):
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        json.dump(result.to_dict(), handle, sort_keys=True)
        handle.write("\n")


def result_from_json(path):
    with open(path, "r", encoding="ascii") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise OSError("corrupt result file %s: %s" % (path, exc)) from None
    try:
        return EstimatorResult.from_dict(document)
    except (KeyError, TypeError, ValueError) as exc:
        raise OSError("corrupt result file %s: %s" % (path, exc)) from None


def solve_mle(stats):
    """Unpenalized maximum likelihood drift ``b_hat c_hat^{-1}``.

    Uses a linear solve (never an explicit inverse) plus iterative
    refinement until ``||A c_hat - b_hat||_inf <= 1e-8 * ||b_hat||_inf``.
    Raises ``NumericalError`` when the condition number of ``c_hat`` is
    ``1e12`` or worse.
    """
    condition = float(np.linalg.cond(stats.c_hat))
    if not math.isfinite(condition) or condition >= 1e12:
        raise NumericalError(
            "c_hat is too ill conditioned for maximum likelihood (condition %.3e)" % condition
        )
    estimate = np.linalg.solve(stats.c_hat, stats.b_hat.T).T
    tolerance = 1e-8 * float(np.max(np.abs(stats.b_hat)))
    for _ in range(5):
        residual = estimate @ stats.c_hat - stats.b_hat
        if float(np.max(np.abs(residual))) <= tolerance:
            break
        estimate = estimate - np.linalg.solve(stats.c_hat, residual.T).T
    else:
        raise NumericalError("maximum likelihood solve could not reach its residual tolerance")
    value = _objective(stats, estimate, None)
    return EstimatorResult(
        estimate=DriftMatrix(stats.dim, estimate),
        objective_history=[value],
        iterations=0,
        converged=True,
        lambda_used=None,
        penalty_kind="none",
    )


def _objective(stats, a, penalty):
    product = a @ stats.c_hat
    value = 0.5 * float(np.einsum("ij,ij->", product, a))
    value -= float(np.einsum("ij,ij->", a, stats.b_hat))
    if penalty is not None:
        value += penalty(a)
    return value


def _gradient(stats, a):
    return a @ stats.c_hat - stats.b_hat


def _proximal_path(stats, penalty, prox, config, warm_start, lambda_used, penalty_kind):
    # Monotone accelerated proximal gradient. `penalty(a)` evaluates the
    # regularizer, `prox(v, curvature)` applies its proximal map with step
    # 1 / curvature.
    config = config or SolverConfig()
    lipschitz = stats.curvature_bound
    if lipschitz <= 0:
        raise NumericalError("c_hat has zero curvature; the penalized problem is degenerate")
    # Small inflation guards the power-iteration underestimate of the
    # largest eigenvalue.
    smoothness = lipschitz * (1.0 + 1e-6)
    if warm_start is None:
        current = np.zeros((stats.dim, stats.dim))
    else:
        current = np.array(warm_start, dtype=float)
        if current.shape != (stats.dim, stats.dim):
            raise ValueError("warm start must have shape (%d, %d)" % (stats.dim, stats.dim))
    momentum_point = current
    momentum = 1.0
    objective = _objective(stats, current, penalty)
    history = [objective]
    iterations = 0
    converged = False

    def prox_step(point, scale):
        return prox(point - _gradient(stats, point) / scale, scale)

    for _ in range(config.max_iters):
        iterations += 1
        if config.step_rule == "backtracking":
            candidate, smoothness = _backtracking_step(
                stats, penalty, prox, momentum_point, smoothness, config.backtracking_factor
            )
        else:
            candidate = prox_step(momentum_point, smoothness)
        candidate_value = _objective(stats, candidate, penalty)
        if candidate_value > objective:
            # Momentum overshoot: restart and take a plain step from the
            # current iterate, which cannot increase the objective when the
            # step honors the true smoothness bound.
            momentum = 1.0
            for _ in range(60):
                candidate = prox_step(current, smoothness)
                candidate_value = _objective(stats, candidate, penalty)
                if candidate_value <= objective:
                    break
                smoothness *= 2.0
            else:
                candidate, candidate_value = current, objective
        momentum_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        momentum_point = candidate + ((momentum - 1.0) / momentum_next) * (candidate - current)
        previous_value = objective
        current, objective = candidate, candidate_value
        momentum = momentum_next
        history.append(objective)
        decrease = previous_value - objective
        if decrease <= config.rel_tol * max(abs(previous_value), 1e-300):
            residual = current - prox_step(current, smoothness)
            bound = config.rel_tol * (1.0 + float(np.max(np.abs(current))))
            if float(np.max(np.abs(residual))) <= bound:
                converged = True
                break
    return EstimatorResult(
        estimate=DriftMatrix(stats.dim, current),
        objective_history=history,
        iterations=iterations,
        converged=converged,
        lambda_used=lambda_used,
        penalty_kind=penalty_kind,
    )


def _backtracking_step(stats, penalty, prox, point, smoothness, factor):
    # Increase the curvature estimate until the quadratic upper model holds.
    gradient = _gradient(stats, point)
    base = _objective(stats, point, None)
    for _ in range(60):
        candidate = prox(point - gradient / smoothness, smoothness)
        diff = candidate - point
        quad = base + float(np.einsum("ij,ij->", gradient, diff))
        quad += 0.5 * smoothness * float(np.einsum("ij,ij->", diff, diff))
        if _objective(stats, candidate, None) <= quad + 1e-12 * max(1.0, abs(quad)):
            return candidate, smoothness
        smoothness /= factor
    return candidate, smoothness


def solve_lasso(stats, lam, config=None, warm_start=None):
    """Drift estimate with the entrywise l1 penalty ``lam * ||A||_1``.

    Parameters
    ----------
    stats : SuffStats
    lam : float
        Nonnegative regularization level. ``lam = 0`` recovers the
        unpenalized minimizer; ``lam >= ||b_hat||_inf`` yields exactly zero
        from a zero start.
    config : SolverConfig, optional
    warm_start : ndarray, optional
        Starting point, by default the zero matrix.

    Returns
    -------
    EstimatorResult
    """
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    def penalty(a):
        return lam * float(np.sum(np.abs(a)))

    def prox(v, curvature):
        # Dividing lam by the same curvature used for the gradient step keeps
        # the threshold and the stepped point rounding-consistent, so
        # lam == ||b_hat||_inf still maps a zero start to exactly zero.
        return prox_l1(v, lam / curvature)

    return _proximal_path(stats, penalty, prox, config, warm_start, lam, "l1")


def solve_slope(stats, lam, weights=None, config=None, warm_start=None):
    """Drift estimate with the sorted-l1 penalty.

    Parameters
    ----------
    stats : SuffStats
    lam : float
        Nonnegative scale multiplying the weighted sorted-l1 norm.
    weights : WeightVector, optional
        Defaults to ``slope_weights(dim * dim)``, i.e.
        ``w_i = sqrt(log(2 d^2 / i))`` over flattened entries.
    config : SolverConfig, optional
    warm_start : ndarray, optional

    Returns
    -------
    EstimatorResult
    """
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if weights is None:
        weights = slope_weights(stats.dim * stats.dim)
    if not isinstance(weights, WeightVector):
        weights = WeightVector(np.asarray(weights, dtype=float))
    if len(weights) != stats.dim * stats.dim:
        raise ValueError("weights must have length dim * dim")

    def penalty(a):
        return lam * sorted_l1_norm(a, weights)

    def prox(v, curvature):
        return prox_sorted_l1(v, weights, lam / curvature)

    return _proximal_path(stats, penalty, prox, config, warm_start, lam, "sorted_l1")
