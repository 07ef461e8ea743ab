"""Simulation of linear stochastic dynamics driven by Brownian noise.

The process follows ``dx(t) = A x(t) dt + dw(t)`` on ``[0, T]`` where ``A`` is
a fixed ``d x d`` drift matrix and ``w`` is a standard ``d``-dimensional
Brownian motion. Repeated independent paths are observed on the uniform grid
``t_k = k * step``. Two samplers are provided:

* ``simulate_euler``: Euler-Maruyama recursion, first-order weak accuracy in
  the step size.
* ``simulate_exact``: samples the exact Gaussian transition, i.e. the grid
  marginals have the true law for any step size.

Random numbers come from counter-based Philox streams keyed by
``(seed, path index)``, so path ``i`` is bit-identical no matter how many
paths are requested and independent of any batching or threading.
"""

import dataclasses
import json

import numpy as np
import scipy.linalg

from .errors import NumericalError

_MASK64 = (1 << 64) - 1

_BUNDLE_FORMAT = "sparse-ou-paths"


def _splitmix64(value):
    # Finalizer of the splitmix64 generator: a full-avalanche 64-bit mixer.
    value = (value + 0x9E3779B97F4A7C15) & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (value ^ (value >> 31)) & _MASK64


def mix_seed(*parts):
    """Mix integers into one 64-bit seed with avalanche behavior.

    Used to derive independent sub-seeds, for example per ``(master seed,
    dimension, replicate)``. Order matters: ``mix_seed(1, 2) != mix_seed(2, 1)``.
    """
    acc = 0x243F6A8885A308D3
    for part in parts:
        acc = _splitmix64(acc ^ (int(part) & _MASK64))
    return acc


def path_stream(seed, index):
    """Return the random stream owned by one path.

    Philox keyed by the pair ``(seed, index)``. Streams for distinct pairs
    are independent, and growing the number of paths never alters the draws
    of existing paths.
    """
    if index < 0:
        raise ValueError("path index must be nonnegative")
    key = ((int(seed) & _MASK64) << 64) | (int(index) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclasses.dataclass(frozen=True, eq=False)
class DriftMatrix:
    """Square drift matrix, optionally carrying its known sparsity pattern.

    Parameters
    ----------
    dim : int
        State dimension ``d >= 1``.
    entries : ndarray, shape (dim, dim)
        The matrix itself. Stored read-only.
    true_support : frozenset of (int, int), optional
        Index set of nonzero entries. When given it must equal the actual
        nonzero pattern of ``entries``; estimators use it for support
        metrics, never for fitting.
    """

    dim: int
    entries: np.ndarray
    true_support: frozenset = None

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (self.dim, self.dim):
            raise ValueError(
                "entries must have shape (%d, %d), got %r" % (self.dim, self.dim, entries.shape)
            )
        if not np.all(np.isfinite(entries)):
            raise ValueError("entries must be finite")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        if self.true_support is not None:
            support = frozenset((int(i), int(j)) for i, j in self.true_support)
            actual = frozenset(zip(*np.nonzero(entries)))
            actual = frozenset((int(i), int(j)) for i, j in actual)
            if support != actual:
                raise ValueError("true_support does not match the nonzero pattern of entries")
            object.__setattr__(self, "true_support", support)

    @property
    def nnz(self):
        return int(np.count_nonzero(self.entries))


@dataclasses.dataclass(frozen=True, eq=False)
class InitialLaw:
    """Law of the state at time zero.

    ``kind`` is ``"zero"`` (start at the origin) or ``"gaussian"`` (centered
    Gaussian with the given covariance). ``subgaussian_factor`` is metadata
    recording the assumed sub-Gaussian proxy constant; it never affects
    sampling.
    """

    kind: str = "zero"
    covariance: np.ndarray = None
    subgaussian_factor: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "gaussian"):
            raise ValueError("kind must be 'zero' or 'gaussian', got %r" % (self.kind,))
        if self.subgaussian_factor <= 0:
            raise ValueError("subgaussian_factor must be positive")
        if self.kind == "gaussian":
            if self.covariance is None:
                raise ValueError("gaussian initial law requires a covariance")
            cov = np.array(self.covariance, dtype=float)
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
                raise ValueError("covariance must be square")
            if not np.all(np.isfinite(cov)):
                raise ValueError("covariance must be finite")
            if not np.allclose(cov, cov.T, atol=1e-10, rtol=0.0):
                raise ValueError("covariance must be symmetric")
            eigvals = np.linalg.eigvalsh(0.5 * (cov + cov.T))
            floor = -1e-10 * max(eigvals.max(), 1.0) if eigvals.size else 0.0
            if eigvals.size and eigvals.min() < floor:
                raise ValueError("covariance must be positive semidefinite")
            cov.flags.writeable = False
            object.__setattr__(self, "covariance", cov)
        elif self.covariance is not None:
            raise ValueError("zero initial law takes no covariance")

    def dim_or_none(self):
        return None if self.covariance is None else self.covariance.shape[0]


@dataclasses.dataclass(frozen=True, eq=False)
class PathBundle:
    """A batch of simulated paths on a shared uniform time grid.

    ``values`` has shape ``(n_paths, grid_len, dim)`` with
    ``values[i, k]`` the state of path ``i`` at time ``k * step``. The array
    is read-only; derived bundles (splits, slices) copy.
    """

    n_paths: int
    dim: int
    terminal: float
    step: float
    grid_len: int
    seed: int
    values: np.ndarray

    def __post_init__(self):
        if self.n_paths < 1 or self.dim < 1:
            raise ValueError("n_paths and dim must be positive")
        if self.step <= 0 or self.terminal <= 0:
            raise ValueError("step and terminal must be positive")
        if self.grid_len != _grid_length(self.terminal, self.step):
            raise ValueError("grid_len inconsistent with terminal and step")
        if not (self.grid_len * self.step >= self.terminal >= (self.grid_len - 1) * self.step - 1e-12):
            raise ValueError("time grid does not cover [0, terminal]")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.n_paths, self.grid_len, self.dim):
            raise ValueError(
                "values must have shape (%d, %d, %d)" % (self.n_paths, self.grid_len, self.dim)
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def times(self):
        """Grid times ``k * step`` for ``k = 0 .. grid_len - 1``."""
        return np.arange(self.grid_len) * self.step


def _grid_length(terminal, step):
    ratio = terminal / step
    rounded = round(ratio)
    if rounded < 1 or abs(ratio - rounded) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError("terminal must be an integer multiple of step, got ratio %r" % (ratio,))
    return int(rounded) + 1


def _psd_factor(matrix, relative_floor=1e-12):
    # Symmetric eigendecomposition based factor S with S S^T = matrix.
    # Tiny negative eigenvalues (roundoff of a PSD matrix) are clipped to 0.
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    top = max(float(eigvals.max()), 0.0) if eigvals.size else 0.0
    eigvals = np.where(eigvals > relative_floor * top, eigvals, np.maximum(eigvals, 0.0))
    eigvals = np.clip(eigvals, 0.0, None)
    return eigvecs * np.sqrt(eigvals)


def matrix_exponential(matrix):
    """Matrix exponential by scaling-and-squaring with Pade approximants.

    Parameters
    ----------
    matrix : ndarray, shape (d, d)
        Square matrix with finite entries.

    Returns
    -------
    ndarray, shape (d, d)
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite")
    return scipy.linalg.expm(m)


def _van_loan(a, duration):
    # Block-exponential trick: exponentiating [[A, I], [0, -A^T]] * t packs
    # the transition e^{tA} and the noise integral int_0^t e^{sA} e^{sA^T} ds
    # into one call.
    d = a.shape[0]
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = a
    block[:d, d:] = np.eye(d)
    block[d:, d:] = -a.T
    full = matrix_exponential(block * duration)
    transition = full[:d, :d]
    gramian = full[:d, d:] @ transition.T
    return transition, 0.5 * (gramian + gramian.T)


def transition_matrix(drift_entries, duration):
    """Conditional-mean multiplier ``exp(duration * A)``."""
    a = np.asarray(getattr(drift_entries, "entries", drift_entries), dtype=float)
    return _van_loan(a, float(duration))[0]


def noise_gramian(drift_entries, duration):
    """Accumulated noise covariance ``int_0^duration e^{sA} e^{sA^T} ds``.

    This is the conditional covariance of the state one ``duration`` ahead
    given the current state, and also the time-``duration`` covariance of a
    path started at the origin.
    """
    a = np.asarray(getattr(drift_entries, "entries", drift_entries), dtype=float)
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    return _van_loan(a, float(duration))[1]


def _initial_factor(law, dim):
    if law.kind == "zero":
        return None
    if law.covariance.shape[0] != dim:
        raise ValueError("initial law covariance dimension does not match the drift")
    return _psd_factor(law.covariance)


def _draw_noise(law, init_factor, n_paths, steps, dim, seed):
    # One Philox stream per path: the initial draw first, then the step
    # normals, so adding paths never disturbs existing ones.
    starts = np.zeros((n_paths, dim))
    normals = np.empty((n_paths, steps, dim))
    for i in range(n_paths):
        gen = path_stream(seed, i)
        if init_factor is not None:
            starts[i] = init_factor @ gen.standard_normal(dim)
        normals[i] = gen.standard_normal((steps, dim))
    return starts, normals


def _check_finite_paths(values, label):
    if not np.all(np.isfinite(values)):
        raise NumericalError("%s produced non-finite path values (overflow)" % (label,))


def simulate_euler(drift, law, n_paths, terminal, step, seed):
    """Simulate paths with the Euler-Maruyama recursion.

    ``x[k+1] = x[k] + step * A x[k] + sqrt(step) * z[k]`` with independent
    standard normal increments ``z[k]``.

    Parameters
    ----------
    drift : DriftMatrix
    law : InitialLaw
    n_paths : int
    terminal : float
        Horizon ``T``; must be an integer multiple of ``step``.
    step : float
        Grid spacing.
    seed : int
        Master seed; path ``i`` uses the stream keyed by ``(seed, i)``.

    Returns
    -------
    PathBundle
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    grid_len = _grid_length(terminal, step)
    d = drift.dim
    a = drift.entries
    starts, normals = _draw_noise(law, _initial_factor(law, d), n_paths, grid_len - 1, d, seed)
    values = np.empty((n_paths, grid_len, d))
    values[:, 0] = starts
    scale = np.sqrt(step)
    for k in range(grid_len - 1):
        state = values[:, k]
        values[:, k + 1] = state + step * (state @ a.T) + scale * normals[:, k]
    _check_finite_paths(values, "simulate_euler")
    return PathBundle(n_paths, d, float(terminal), float(step), grid_len, int(seed), values)


def simulate_exact(drift, law, n_paths, terminal, step, seed):
    """Simulate paths from the exact Gaussian transition kernel.

    ``x[k+1] = e^{step * A} x[k] + eta[k]`` with
    ``eta[k] ~ N(0, int_0^step e^{sA} e^{sA^T} ds)``, so every grid marginal
    has the true law regardless of the step size.

    Parameters and return value match ``simulate_euler``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    grid_len = _grid_length(terminal, step)
    d = drift.dim
    transition, gramian = _van_loan(drift.entries, float(step))
    noise_factor = _psd_factor(gramian)
    starts, normals = _draw_noise(law, _initial_factor(law, d), n_paths, grid_len - 1, d, seed)
    values = np.empty((n_paths, grid_len, d))
    values[:, 0] = starts
    for k in range(grid_len - 1):
        values[:, k + 1] = values[:, k] @ transition.T + normals[:, k] @ noise_factor.T
    _check_finite_paths(values, "simulate_exact")
    return PathBundle(n_paths, d, float(terminal), float(step), grid_len, int(seed), values)


def save_bundle(bundle, path):
    """Write a bundle to ``path``: one JSON header line, then the payload.

    The payload is the raw little-endian float64 ``values`` array in
    path-major (C) order.
    """
    header = {
        "format": _BUNDLE_FORMAT,
        "version": 1,
        "n_paths": bundle.n_paths,
        "dim": bundle.dim,
        "grid_len": bundle.grid_len,
        "terminal": bundle.terminal,
        "step": bundle.step,
        "seed": bundle.seed,
        "dtype": "<f8",
        "order": "path-major",
    }
    with open(path, "wb") as handle:
        handle.write(json.dumps(header, sort_keys=True).encode("ascii"))
        handle.write(b"\n")
        handle.write(np.ascontiguousarray(bundle.values, dtype="<f8").tobytes())


def load_bundle(path):
    """Read a bundle written by ``save_bundle``.

    Raises ``OSError`` when the container is truncated or the header is
    inconsistent with the payload size.
    """
    with open(path, "rb") as handle:
        header_line = handle.readline()
        payload = handle.read()
    try:
        header = json.loads(header_line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise OSError("corrupt bundle header in %s: %s" % (path, exc)) from None
    if not isinstance(header, dict) or header.get("format") != _BUNDLE_FORMAT:
        raise OSError("not a path bundle container: %s" % (path,))
    try:
        n_paths = int(header["n_paths"])
        dim = int(header["dim"])
        grid_len = int(header["grid_len"])
        terminal = float(header["terminal"])
        step = float(header["step"])
        seed = int(header["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise OSError("corrupt bundle header in %s: %s" % (path, exc)) from None
    expected = n_paths * grid_len * dim * 8
    if len(payload) != expected:
        raise OSError(
            "corrupt bundle payload in %s: expected %d bytes, found %d"
            % (path, expected, len(payload))
        )
    values = np.frombuffer(payload, dtype="<f8").astype(float).reshape(n_paths, grid_len, dim)
    try:
        return PathBundle(n_paths, dim, terminal, step, grid_len, seed, values)
    except ValueError as exc:
        raise OSError("corrupt bundle header in %s: %s" % (path, exc)) from None


def bundle_to_csv(bundle, path):
    """Export a bundle as CSV with one row per (path, time) pair."""
    columns = ",".join("x%d" % j for j in range(bundle.dim))
    times = bundle.times()
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("path,time,%s\n" % columns)
        for i in range(bundle.n_paths):
            for k in range(bundle.grid_len):
                row = ",".join(repr(float(v)) for v in bundle.values[i, k])
                handle.write("%d,%s,%s\n" % (i, repr(float(times[k])), row))
