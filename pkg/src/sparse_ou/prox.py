"""Proximal operators for the l1 and sorted-l1 (decreasing-weight) penalties.

The sorted-l1 norm of a vector ``v`` with positive nonincreasing weights
``w`` is ``sum_i w_i * |v|_(i)`` where ``|v|_(1) >= |v|_(2) >= ...`` are the
sorted magnitudes. Matrices are penalized through their flattened entries.
"""

import dataclasses

import numpy as np


@dataclasses.dataclass(frozen=True, eq=False)
class WeightVector:
    """Positive nonincreasing weight sequence for the sorted-l1 penalty."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("weights must be nonempty")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be positive and finite")
        if np.any(np.diff(w) > 0):
            raise ValueError("weights must be nonincreasing")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size


def slope_weights(p):
    """Default weight sequence ``w_i = sqrt(log(2 p / i))`` for ``i = 1..p``.

    For a ``d x d`` matrix pass ``p = d * d``. All weights are positive since
    ``2p / p = 2 > 1``, and they decrease in ``i``.
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    ranks = np.arange(1, p + 1, dtype=float)
    return WeightVector(np.sqrt(np.log(2.0 * p / ranks)))


def sorted_l1_norm(v, weights):
    """Evaluate ``sum_i w_i |v|_(i)`` for a vector or matrix ``v``."""
    values = np.abs(np.asarray(v, dtype=float)).ravel()
    w = weights.weights
    if values.size != w.size:
        raise ValueError("weight length %d does not match input size %d" % (w.size, values.size))
    return float(np.sort(values)[::-1] @ w)


def prox_l1(v, threshold):
    """Entrywise soft threshold: ``sign(v) * max(|v| - threshold, 0)``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    values = np.asarray(v, dtype=float)
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def _isotonic_nonincreasing(z):
    # Pool adjacent violators with a stack of (sum, count) blocks; each final
    # block is replaced by its mean, yielding the euclidean projection onto
    # the nonincreasing cone.
    sums = []
    counts = []
    for value in z:
        total, size = float(value), 1
        # Merge while the accumulated mean would exceed the previous block's.
        while sums and total * counts[-1] >= sums[-1] * size:
            total += sums.pop()
            size += counts.pop()
        sums.append(total)
        counts.append(size)
    out = np.empty(len(z))
    pos = 0
    for total, size in zip(sums, counts):
        out[pos:pos + size] = total / size
        pos += size
    return out


def prox_sorted_l1(v, weights, scale):
    """Proximal map of ``scale * sorted_l1_norm(., weights)``.

    Solves ``argmin_x 0.5 * ||x - v||^2 + scale * sum_i w_i |x|_(i)``.
    The solution keeps the signs of ``v`` and the ordering of its
    magnitudes, so it reduces to: sort ``|v|`` in decreasing order, subtract
    ``scale * w``, project onto the nonincreasing cone (pool adjacent
    violators), clip at zero, then undo the sort and signs.

    Accepts a vector or matrix; the output has the shape of ``v``.
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    values = np.asarray(v, dtype=float)
    flat = values.ravel()
    w = weights.weights
    if flat.size != w.size:
        raise ValueError("weight length %d does not match input size %d" % (w.size, flat.size))
    if scale == 0:
        return values.copy()
    magnitudes = np.abs(flat)
    order = np.argsort(-magnitudes, kind="stable")
    shifted = magnitudes[order] - scale * w
    pooled = np.clip(_isotonic_nonincreasing(shifted), 0.0, None)
    out = np.empty_like(flat)
    out[order] = pooled
    return (np.sign(flat) * out).reshape(values.shape)
