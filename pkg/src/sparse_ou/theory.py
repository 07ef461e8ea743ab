"""Population quantities and empirical checks of the statistical theory.

The time-integrated second moment of a path started from a centered law with
covariance ``Sigma`` is

``C(T) = int_0^T ( e^{tA} Sigma e^{tA^T} + int_0^t e^{sA} e^{sA^T} ds ) dt``

whose extreme eigenvalues ``kappa_min``/``kappa_max`` govern the curvature
of the estimation problem. This module computes ``C(T)`` by adaptive Simpson
quadrature over Van Loan block exponentials, checks concentration of the
empirical second-moment statistic around it, runs error-rate sweeps for the
penalized estimators, and provides the antisymmetric drift family whose
pairwise path-law divergence has a closed form.
"""

import dataclasses
import math

import numpy as np

from .errors import NumericalError, UnsupportedInputError
from .experiments import generate_drift
from .model_select import cross_validate, split_paths
from .process import (
    DriftMatrix,
    mix_seed,
    noise_gramian,
    path_stream,
    simulate_euler,
    simulate_exact,
    transition_matrix,
)
from .suffstats import compute_suffstats


@dataclasses.dataclass(frozen=True, eq=False)
class TheoryQuantities:
    """Time-integrated second moment and its spectral summaries.

    ``kappa_star = kappa_max + kappa_min / 2`` is the upper edge of the
    eigenvalue band used by the concentration event;
    ``spectral_abscissa_abs`` is ``max_i |Re eig_i(A)|`` and
    ``eigvec_condition`` the condition number of the eigenvector matrix.
    """

    c_infty: np.ndarray
    kappa_min: float
    kappa_max: float
    kappa_star: float
    spectral_abscissa_abs: float
    eigvec_condition: float

    def to_dict(self):
        return {
            "c_infty": [[float(v) for v in row] for row in self.c_infty],
            "kappa_min": self.kappa_min,
            "kappa_max": self.kappa_max,
            "kappa_star": self.kappa_star,
            "spectral_abscissa_abs": self.spectral_abscissa_abs,
            "eigvec_condition": self.eigvec_condition,
        }


@dataclasses.dataclass(frozen=True)
class ConcentrationPoint:
    n_paths: int
    mean_deviation: float
    sandwich_frequency: float


@dataclasses.dataclass(frozen=True, eq=False)
class RateCheckReport:
    """Outcome of an error-rate sweep along one axis."""

    sweep_axis: str
    points: list
    fitted_exponent: float
    expected_exponent: float
    psi: list
    p: int

    def to_dict(self):
        return {
            "sweep_axis": self.sweep_axis,
            "points": [[float(a), float(b)] for a, b in self.points],
            "fitted_exponent": self.fitted_exponent,
            "expected_exponent": self.expected_exponent,
            "psi": [float(v) for v in self.psi],
            "p": self.p,
        }


def _spectral_summaries(a):
    eigvals, eigvecs = np.linalg.eig(a)
    try:
        inverse = np.linalg.inv(eigvecs)
    except np.linalg.LinAlgError:
        raise UnsupportedInputError("drift matrix is not diagonalizable") from None
    residual = eigvecs @ np.diag(eigvals) @ inverse - a
    scale = max(float(np.linalg.norm(a)), 1.0)
    if float(np.linalg.norm(residual)) > 1e-8 * scale:
        raise UnsupportedInputError(
            "drift matrix is numerically defective (eigendecomposition residual too large)"
        )
    abscissa = float(np.max(np.abs(eigvals.real)))
    condition = float(np.linalg.norm(eigvecs, 2) * np.linalg.norm(inverse, 2))
    return abscissa, condition


def _validated_sigma(sigma, dim):
    if sigma is None:
        return np.zeros((dim, dim))
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (dim, dim):
        raise ValueError("sigma must have shape (%d, %d)" % (dim, dim))
    if not np.allclose(sigma, sigma.T, atol=1e-10, rtol=0.0):
        raise ValueError("sigma must be symmetric")
    eigvals = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    if eigvals.min() < -1e-10 * max(eigvals.max(), 1.0):
        raise ValueError("sigma must be positive semidefinite")
    return 0.5 * (sigma + sigma.T)


def compute_c_infty(drift, sigma=None, terminal=1.0, rel_tol=1e-8):
    """Time-integrated second moment of the path and spectral summaries.

    Parameters
    ----------
    drift : DriftMatrix
        Must be diagonalizable (checked through the eigendecomposition
        residual); otherwise ``UnsupportedInputError``.
    sigma : ndarray, optional
        Covariance of the initial state, default zero.
    terminal : float
        Integration horizon ``T``.
    rel_tol : float
        Relative Frobenius tolerance between successive Simpson refinements.

    Returns
    -------
    TheoryQuantities
    """
    if terminal <= 0:
        raise ValueError("terminal must be positive")
    a = drift.entries
    dim = drift.dim
    sigma = _validated_sigma(sigma, dim)
    abscissa, condition = _spectral_summaries(a)

    def integrand(t):
        flow = transition_matrix(a, t)
        return flow @ sigma @ flow.T + noise_gramian(a, t)

    previous = None
    intervals = 8
    while intervals <= 4096:
        nodes = np.linspace(0.0, terminal, intervals + 1)
        values = np.array([integrand(t) for t in nodes])
        width = terminal / intervals
        total = values[0] + values[-1] + 4.0 * values[1:-1:2].sum(axis=0)
        total = total + 2.0 * values[2:-1:2].sum(axis=0)
        estimate = total * (width / 3.0)
        if previous is not None:
            gap = float(np.linalg.norm(estimate - previous))
            if gap <= rel_tol * max(float(np.linalg.norm(estimate)), 1e-300):
                break
        previous = estimate
        intervals *= 2
    else:
        raise NumericalError("quadrature for the integrated second moment did not converge")
    c_matrix = 0.5 * (estimate + estimate.T)
    eigvals = np.linalg.eigvalsh(c_matrix)
    kappa_min = float(eigvals[0])
    kappa_max = float(eigvals[-1])
    return TheoryQuantities(
        c_infty=c_matrix,
        kappa_min=kappa_min,
        kappa_max=kappa_max,
        kappa_star=kappa_max + 0.5 * kappa_min,
        spectral_abscissa_abs=abscissa,
        eigvec_condition=condition,
    )


def kappa_envelope(quantities, sigma=None, terminal=1.0):
    """A priori sandwich for the extreme eigenvalues of the integrated moment.

    Returns ``(lower, upper)`` with
    ``lower = 0.5 * p0^{-2} T^2 exp(-2 a0 T) <= kappa_min`` and
    ``kappa_max <= upper = p0^2 (T + ||sigma||_op) T exp(2 a0 T)`` where
    ``a0`` is the absolute spectral abscissa and ``p0`` the eigenvector
    condition number.
    """
    a0 = quantities.spectral_abscissa_abs
    p0 = quantities.eigvec_condition
    sigma_norm = 0.0 if sigma is None else float(np.linalg.norm(np.asarray(sigma, dtype=float), 2))
    lower = 0.5 * terminal * terminal * math.exp(-2.0 * a0 * terminal) / (p0 * p0)
    upper = p0 * p0 * (terminal + sigma_norm) * terminal * math.exp(2.0 * a0 * terminal)
    return lower, upper


def check_concentration(drift, law, n_list, reps, seed, terminal=1.0, step=0.01, sampler="exact"):
    """Measure how the empirical second-moment statistic concentrates.

    For each sample size ``N`` this simulates ``reps`` independent bundles,
    records the operator-norm deviation of the statistic from the population
    moment, and the frequency of the eigenvalue-sandwich event
    that every eigenvalue of ``c_hat`` lies within
    ``[kappa_min / 2, kappa_max + kappa_min / 2]``.

    Returns a list of ``ConcentrationPoint`` in the order of ``n_list``.
    """
    if not n_list or any(int(n) < 1 for n in n_list):
        raise ValueError("n_list must contain positive sample sizes")
    if reps < 1:
        raise ValueError("reps must be positive")
    if sampler not in ("exact", "euler"):
        raise ValueError("sampler must be 'exact' or 'euler'")
    simulate = simulate_exact if sampler == "exact" else simulate_euler
    sigma = law.covariance if law.kind == "gaussian" else None
    quantities = compute_c_infty(drift, sigma=sigma, terminal=terminal)
    band_low = 0.5 * quantities.kappa_min
    band_high = quantities.kappa_star
    points = []
    for n_paths in n_list:
        n_paths = int(n_paths)
        deviations = []
        hits = 0
        for replicate in range(reps):
            bundle = simulate(drift, law, n_paths, terminal, step,
                              mix_seed(seed, 4, n_paths, replicate))
            stats = compute_suffstats(bundle)
            deviations.append(float(np.linalg.norm(stats.c_hat - quantities.c_infty, 2)))
            spectrum = np.linalg.eigvalsh(stats.c_hat)
            if spectrum[0] >= band_low and spectrum[-1] <= band_high:
                hits += 1
        points.append(ConcentrationPoint(
            n_paths=n_paths,
            mean_deviation=float(np.mean(deviations)),
            sandwich_frequency=hits / reps,
        ))
    return points


def rate_sweep(axis, plan, points, reps, p=2, penalty="l1"):
    """Fit the error-decay exponent of the hold-out-selected estimator.

    Parameters
    ----------
    axis : str
        Sweep axis; only ``"N"`` (number of training paths) is supported.
    plan : ExperimentPlan
        Supplies the dimension (``plan.dims[0]``), drift scheme, grid,
        horizon, step and master seed. The drift is drawn once and reused
        across all points.
    points : sequence of int
        Training sample sizes, each divisible by 4 (a quarter is added as
        validation paths).
    reps : int
        Replicates per point.
    p : {1, 2}
        Exponent convention of the reference envelope
        ``psi = s^{1/p} sqrt(log(e d^2 / s) / N)``.
    penalty : {"l1", "sorted_l1"}

    Returns
    -------
    RateCheckReport
        ``points`` holds (N, mean l2 error), ``fitted_exponent`` the
        least-squares slope of log mean error against log N.
    """
    if axis != "N":
        raise ValueError("only the 'N' sweep axis is supported")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if reps < 1:
        raise ValueError("reps must be positive")
    sizes = [int(n) for n in points]
    if len(sizes) < 2 or any(n < 8 for n in sizes):
        raise ValueError("points must contain at least two sample sizes >= 8")
    dim = plan.dims[0]
    drift = generate_drift(dim, plan, mix_seed(plan.master_seed, 1, dim))
    sparsity = drift.nnz
    means = []
    for n_train in sizes:
        n_valid = max(n_train // 4, 8)
        errors = []
        for replicate in range(reps):
            bundle = simulate_euler(
                drift, plan.initial_law, n_train + n_valid, plan.terminal, plan.step,
                mix_seed(plan.master_seed, 3, n_train, replicate),
            )
            train, valid = split_paths(bundle, n_train)
            report = cross_validate(
                compute_suffstats(train), compute_suffstats(valid),
                plan.grid, penalty=penalty, config=plan.solver,
            )
            delta = report.result.estimate.entries - drift.entries
            errors.append(float(np.linalg.norm(delta)))
        means.append(float(np.mean(errors)))
    slope = float(np.polyfit(np.log(sizes), np.log(means), 1)[0])
    psi = [
        sparsity ** (1.0 / p) * math.sqrt(math.log(math.e * dim * dim / sparsity) / n)
        for n in sizes
    ]
    return RateCheckReport(
        sweep_axis="N",
        points=list(zip(sizes, means)),
        fitted_exponent=slope,
        expected_exponent=-0.5,
        psi=psi,
        p=p,
    )


def minimax_family(dim, sparsity, w, count, seed):
    """Antisymmetric perturbation family used for divergence calculations.

    Members are ``A = -0.5 I - w B`` where ``B`` is antisymmetric with
    entries in ``{-1, 0, 1}`` and exactly ``r`` nonzeros, ``r`` the largest
    even integer at most ``(sparsity - dim) / 2``. Supports and signs are
    sampled uniformly without repetition across the returned members.

    Parameters
    ----------
    dim : int
        At least 4.
    sparsity : int
        Overall sparsity budget, at least ``2 * dim``.
    w : float
        Positive perturbation size.
    count : int
        Number of distinct members to draw.
    seed : int

    Returns
    -------
    list of DriftMatrix
    """
    if dim < 4:
        raise ValueError("dim must be at least 4")
    if sparsity < 2 * dim:
        raise ValueError("sparsity must be at least 2 * dim")
    if w <= 0:
        raise ValueError("w must be positive")
    if count < 1:
        raise ValueError("count must be positive")
    r = int((sparsity - dim) // 2)
    if r % 2:
        r -= 1
    pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    half = r // 2
    if half > len(pairs):
        raise ValueError("sparsity budget exceeds the available off-diagonal pairs")
    gen = path_stream(seed, 6)
    members = []
    seen = set()
    attempts = 0
    while len(members) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ValueError("cannot draw %d distinct members" % (count,))
        chosen = gen.choice(len(pairs), size=half, replace=False)
        signs = gen.choice([-1.0, 1.0], size=half)
        key = tuple(sorted((int(c), float(s)) for c, s in zip(chosen, signs)))
        if key in seen:
            continue
        seen.add(key)
        b = np.zeros((dim, dim))
        for index, sign in zip(chosen, signs):
            i, j = pairs[int(index)]
            b[i, j] = sign
            b[j, i] = -sign
        entries = -0.5 * np.eye(dim) - w * b
        support = frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(entries)))
        members.append(DriftMatrix(dim, entries, true_support=support))
    return members


def _family_alpha(a):
    # The drift must be -(alpha I) plus an antisymmetric part.
    symmetric = 0.5 * (a + a.T)
    alpha = -float(np.mean(np.diag(symmetric)))
    if alpha <= 0:
        raise UnsupportedInputError("symmetric part must be a negative multiple of the identity")
    if float(np.max(np.abs(symmetric + alpha * np.eye(a.shape[0])))) > 1e-10:
        raise UnsupportedInputError(
            "drift is not of the antisymmetric-perturbation form -(alpha I + antisymmetric)"
        )
    return alpha


def kl_between(a1, a2, n_paths, terminal=1.0):
    """Path-law divergence between two antisymmetric-perturbation drifts.

    For drifts ``A = -(alpha I + antisymmetric)`` started at the origin the
    state covariance is the explicit scalar multiple
    ``(1 - e^{-2 alpha t}) / (2 alpha) * I`` of the identity, so the
    divergence of the joint law of ``n_paths`` independent paths over
    ``[0, terminal]`` reduces to

    ``0.5 * n_paths * ||A1 - A2||_F^2 * int_0^T (1 - e^{-2 alpha t}) / (2 alpha) dt``.

    Both drifts must share the same ``alpha`` (each verified entrywise
    within 1e-10); otherwise ``UnsupportedInputError``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if terminal <= 0:
        raise ValueError("terminal must be positive")
    first = np.asarray(a1.entries if hasattr(a1, "entries") else a1, dtype=float)
    second = np.asarray(a2.entries if hasattr(a2, "entries") else a2, dtype=float)
    if first.shape != second.shape or first.ndim != 2 or first.shape[0] != first.shape[1]:
        raise ValueError("drifts must be square matrices of equal shape")
    alpha1 = _family_alpha(first)
    alpha2 = _family_alpha(second)
    if abs(alpha1 - alpha2) > 1e-10:
        raise UnsupportedInputError("drifts must share the same symmetric part")
    alpha = 0.5 * (alpha1 + alpha2)
    # int_0^T (1 - e^{-2 a t}) / (2 a) dt in closed form.
    constant = terminal / (2.0 * alpha) - (1.0 - math.exp(-2.0 * alpha * terminal)) / (4.0 * alpha * alpha)
    gap = first - second
    return 0.5 * n_paths * float(np.sum(gap * gap)) * constant
