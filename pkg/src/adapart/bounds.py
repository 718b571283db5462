"""Upper bounds on the permanent of a matrix and of sets of permutations.

The bound used throughout is Soules' row-sorted bound::

    per(A) <= prod_i sum_j a*_ij * delta(j)

where ``a*_i`` is row ``i`` sorted in decreasing order, ``gamma(k) = (k!)^(1/k)``
and ``delta(k) = gamma(k) - gamma(k - 1)``. On 0/1 matrices it reduces to the
Minc-Bregman bound. All values are natural logarithms; a bound of exactly
zero is ``-inf``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import SizeMismatch
from .matrixio import as_matrix

__all__ = [
    "DeltaTable",
    "SubsetBound",
    "child_log_bounds",
    "delta_table",
    "soules_upper_bound",
    "subset_upper_bound",
    "upper_bound_exceeds_permanent_check",
]


@dataclass(frozen=True)
class DeltaTable:
    """``gamma[k] = (k!)^(1/k)`` and ``delta[k] = gamma[k] - gamma[k-1]``, ``k <= max_k``."""

    max_k: int
    gamma: np.ndarray
    delta: np.ndarray

    @classmethod
    def build(cls, max_k: int) -> "DeltaTable":
        k = np.arange(1, max_k + 1)
        gamma = np.zeros(max_k + 1)
        # lgamma keeps k! from overflowing for large k
        gamma[1:] = np.exp(np.array([math.lgamma(x + 1) for x in k]) / k)
        delta = np.zeros(max_k + 1)
        delta[1:] = np.diff(gamma)
        gamma.setflags(write=False)
        delta.setflags(write=False)
        return cls(max_k, gamma, delta)


_delta_lock = threading.Lock()
_delta: DeltaTable = DeltaTable.build(128)


def delta_table(max_k: int) -> DeltaTable:
    """Return a process-wide table covering at least ``max_k``."""
    global _delta
    table = _delta
    if table.max_k >= max_k:
        return table
    with _delta_lock:
        if _delta.max_k < max_k:
            _delta = DeltaTable.build(max(max_k, 2 * _delta.max_k))
        return _delta


@dataclass(frozen=True)
class SubsetBound:
    log_value: float
    is_tight_singleton: bool = False

    @property
    def is_zero(self) -> bool:
        return self.log_value == -math.inf


def _log_soules(sub: np.ndarray) -> float:
    r = sub.shape[0]
    if r == 0:
        return 0.0
    delta = delta_table(r).delta[1:r + 1]
    sorted_rows = -np.sort(-sub, axis=1)
    row_terms = sorted_rows @ delta
    if np.any(row_terms <= 0):
        return -math.inf
    return float(np.sum(np.log(row_terms)))


def soules_upper_bound(m, active_rows, active_cols) -> SubsetBound:
    """Log Soules bound on the permanent of ``m[active_rows][:, active_cols]``.

    An empty submatrix has permanent 1 (the empty product), so its bound is 0.
    """
    rows = np.asarray(list(active_rows), dtype=np.intp)
    cols = np.asarray(list(active_cols), dtype=np.intp)
    if len(rows) != len(cols):
        raise SizeMismatch(f"{len(rows)} active rows but {len(cols)} active columns")
    m = np.asarray(m, dtype=np.float64)
    value = _log_soules(m[np.ix_(rows, cols)])
    return SubsetBound(value, is_tight_singleton=len(rows) <= 1)


def subset_upper_bound(m, subset) -> SubsetBound:
    """Bound on the total weight of the permutations in ``subset``.

    ``subset`` is a :class:`~adapart.sampler.PermutationSubset`. The fixed
    assignments contribute their exact weight and the free rows and columns
    contribute the Soules bound of the remaining submatrix.
    """
    prefix = subset.log_prefix_weight
    tight = subset.is_singleton
    if prefix == -math.inf:
        return SubsetBound(-math.inf, tight)
    rest = soules_upper_bound(m, subset.free_rows, subset.free_cols)
    return SubsetBound(prefix + rest.log_value, tight)


def child_log_bounds(sub: np.ndarray, log_sub: np.ndarray | None = None) -> np.ndarray:
    """Log Soules bounds for every one-step extension of a free submatrix.

    Entry ``[j, c]`` is the log bound on the set of permutations of ``sub``
    that map column ``c`` to row ``j``: ``log sub[j, c]`` plus the Soules
    bound of ``sub`` with row ``j`` and column ``c`` deleted.

    The Soules factor of row ``i`` after deleting column ``c`` does not
    depend on ``j``, so all ``r * r`` bounds cost one sort per row plus prefix
    sums, ``O(r^2 log r)`` in total.
    """
    r = sub.shape[0]
    if log_sub is None:
        with np.errstate(divide="ignore"):
            log_sub = np.log(sub)
    if r == 1:
        return log_sub.copy()
    delta = delta_table(r).delta
    order = np.argsort(-sub, axis=1, kind="stable")
    srt = np.take_along_axis(sub, order, axis=1)
    # removing the entry at sorted position p: earlier entries keep weight
    # delta(k+1), later ones shift down to delta(k)
    d = delta[1:r]
    prefix = np.zeros((r, r))
    np.cumsum(srt[:, :-1] * d, axis=1, out=prefix[:, 1:])
    suffix = np.zeros((r, r))
    suffix[:, :-1] = np.cumsum((srt[:, 1:] * d)[:, ::-1], axis=1)[:, ::-1]
    by_position = prefix + suffix
    row_factor = np.empty((r, r))
    np.put_along_axis(row_factor, order, by_position, axis=1)
    with np.errstate(divide="ignore"):
        log_factor = np.log(row_factor)  # [i, c]: row i with column c removed

    finite = np.isfinite(log_factor)
    n_zero = r - finite.sum(axis=0)  # rows with no mass left, per column
    total = np.where(finite, log_factor, 0.0).sum(axis=0)
    # exclude row j itself from the product over the other rows
    rest = np.where(finite, total[None, :] - log_factor, total[None, :])
    dead = (n_zero[None, :] - (~finite)) > 0
    rest = np.where(dead, -np.inf, rest)
    return log_sub + rest


def upper_bound_exceeds_permanent_check(m) -> bool:
    """Check ``exp(bound) >= per(m)`` against brute force (``n <= 8``)."""
    from .exact import permanent_brute_force

    m = as_matrix(m)
    n = m.shape[0]
    if n > 8:
        raise ValueError("check limited to n <= 8")
    per = permanent_brute_force(m)
    bound = math.exp(soules_upper_bound(m, range(n), range(n)).log_value)
    scale = max(1.0, per)
    return bound >= per - 1e-9 * scale
