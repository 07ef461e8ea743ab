"""Sufficient statistics of observed paths and the quadratic fitting loss.

For a bundle of ``N`` paths on a grid with spacing ``delta`` the two
statistics are left-point discretizations of the path integrals

* ``c_hat = (1/N) sum_i sum_k delta * x_i(t_k) x_i(t_k)^T``
* ``b_hat = (1/N) sum_i sum_k (x_i(t_{k+1}) - x_i(t_k)) x_i(t_k)^T``

with ``k`` ranging over left endpoints (the last grid point only enters
through increments). They are all an estimator needs: the average negative
log-likelihood of a candidate drift ``A``, up to an additive constant not
depending on ``A``, is ``0.5 * tr(A c_hat A^T) - <A, b_hat>``.
"""

import dataclasses
import functools
import json

import numpy as np

from .process import path_stream


@dataclasses.dataclass(frozen=True, eq=False)
class SuffStats:
    """Sufficient statistics of a path bundle.

    ``c_hat`` is symmetric positive semidefinite; ``b_hat`` is the increment
    cross moment. ``n_paths``, ``terminal`` and ``step`` record the data the
    statistics were computed from.
    """

    dim: int
    c_hat: np.ndarray
    b_hat: np.ndarray
    n_paths: int
    terminal: float
    step: float

    def __post_init__(self):
        if self.dim < 1 or self.n_paths < 1:
            raise ValueError("dim and n_paths must be positive")
        if self.terminal <= 0 or self.step <= 0:
            raise ValueError("terminal and step must be positive")
        c = np.array(self.c_hat, dtype=float)
        b = np.array(self.b_hat, dtype=float)
        if c.shape != (self.dim, self.dim) or b.shape != (self.dim, self.dim):
            raise ValueError("c_hat and b_hat must be (dim, dim)")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b))):
            raise ValueError("statistics must be finite")
        if not np.allclose(c, c.T, atol=1e-10, rtol=0.0):
            raise ValueError("c_hat must be symmetric")
        c = 0.5 * (c + c.T)
        c.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "c_hat", c)
        object.__setattr__(self, "b_hat", b)

    @functools.cached_property
    def curvature_bound(self):
        """Largest eigenvalue of ``c_hat`` (cached power iteration)."""
        return _power_iteration_top(self.c_hat)


@dataclasses.dataclass(frozen=True, eq=False)
class LossReport:
    """Loss value, gradient and curvature bound at one candidate drift."""

    value: float
    gradient: np.ndarray
    lipschitz: float


def compute_suffstats(paths):
    """Reduce a ``PathBundle`` to its sufficient statistics.

    Parameters
    ----------
    paths : PathBundle

    Returns
    -------
    SuffStats
    """
    values = paths.values
    left = values[:, :-1, :]
    increments = values[:, 1:, :] - left
    # Sums over paths and left grid points; numpy's pairwise reduction keeps
    # the result deterministic for a fixed shape.
    c_hat = np.einsum("nkd,nke->de", left, left) * (paths.step / paths.n_paths)
    b_hat = np.einsum("nkd,nke->de", increments, left) / paths.n_paths
    c_hat = 0.5 * (c_hat + c_hat.T)
    return SuffStats(paths.dim, c_hat, b_hat, paths.n_paths, paths.terminal, paths.step)


def _power_iteration_top(matrix, rel_tol=1e-8):
    # Top eigenvalue of a symmetric PSD matrix by power iteration from a
    # fixed seeded start vector; at most 10 * dim iterations.
    dim = matrix.shape[0]
    vec = path_stream(0x5EED0F00D, 0).standard_normal(dim)
    norm = np.linalg.norm(vec)
    vec /= norm
    estimate = 0.0
    for _ in range(10 * dim):
        image = matrix @ vec
        norm = np.linalg.norm(image)
        if norm == 0.0:
            return 0.0
        vec = image / norm
        previous, estimate = estimate, float(vec @ (matrix @ vec))
        if abs(estimate - previous) <= rel_tol * max(abs(estimate), 1e-300):
            break
    return estimate


def loss(stats, candidate):
    """Quadratic loss of a candidate drift against the statistics.

    Parameters
    ----------
    stats : SuffStats
    candidate : ndarray, shape (dim, dim)
        Candidate drift matrix ``A``.

    Returns
    -------
    LossReport
        ``value = 0.5 * tr(A c_hat A^T) - <A, b_hat>`` (equal to the
        discretized average negative log-likelihood up to a constant in
        ``A``), ``gradient = A c_hat - b_hat``, and ``lipschitz`` the top
        eigenvalue of ``c_hat``, which bounds the gradient's Lipschitz
        constant exactly.
    """
    a = np.asarray(candidate, dtype=float)
    if a.shape != (stats.dim, stats.dim):
        raise ValueError("candidate must have shape (%d, %d)" % (stats.dim, stats.dim))
    product = a @ stats.c_hat
    value = 0.5 * float(np.einsum("ij,ij->", product, a)) - float(np.einsum("ij,ij->", a, stats.b_hat))
    gradient = product - stats.b_hat
    return LossReport(value=value, gradient=gradient, lipschitz=stats.curvature_bound)


def martingale_term(stats, true_drift):
    """Empirical noise-times-state integral ``b_hat - A0 c_hat``.

    With the true drift ``A0`` plugged in, the increment cross moment splits
    into the drift part ``A0 c_hat`` plus a centered stochastic-integral
    term; this returns that remainder, which concentrates around zero.
    """
    a0 = np.asarray(true_drift.entries if hasattr(true_drift, "entries") else true_drift, dtype=float)
    if a0.shape != (stats.dim, stats.dim):
        raise ValueError("true drift must have shape (%d, %d)" % (stats.dim, stats.dim))
    return stats.b_hat - a0 @ stats.c_hat


def stats_to_json(stats, path):
    """Write statistics as JSON with round-trip exact float encoding."""
    document = {
        "format": "sparse-ou-suffstats",
        "version": 1,
        "dim": stats.dim,
        "n_paths": stats.n_paths,
        "terminal": stats.terminal,
        "step": stats.step,
        "c_hat": [[float(v) for v in row] for row in stats.c_hat],
        "b_hat": [[float(v) for v in row] for row in stats.b_hat],
    }
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        json.dump(document, handle, sort_keys=True)
        handle.write("\n")


def stats_from_json(path):
    """Read statistics written by ``stats_to_json``."""
    with open(path, "r", encoding="ascii") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise OSError("corrupt statistics file %s: %s" % (path, exc)) from None
    if not isinstance(document, dict) or document.get("format") != "sparse-ou-suffstats":
        raise OSError("not a statistics file: %s" % (path,))
    try:
        return SuffStats(
            dim=int(document["dim"]),
            c_hat=np.array(document["c_hat"], dtype=float),
            b_hat=np.array(document["b_hat"], dtype=float),
            n_paths=int(document["n_paths"]),
            terminal=float(document["terminal"]),
            step=float(document["step"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise OSError("corrupt statistics file %s: %s" % (path, exc)) from None
