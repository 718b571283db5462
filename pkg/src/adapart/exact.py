"""Exact permanents: brute-force enumeration, Ryser, and block-diagonal products.

These are exponential-time oracles. They exist so that every randomized
quantity in the package can be checked against a value computed by an
unrelated route.
"""

from __future__ import annotations

import itertools
import math

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import DimensionTooLarge, NotBlockDiagonal
from .matrixio import as_matrix, block_layout

__all__ = [
    "BRUTE_FORCE_MAX_N",
    "RYSER_MAX_N",
    "has_perfect_matching",
    "permanent_block_diagonal",
    "permanent_brute_force",
    "permanent_ryser",
    "permutation_weights",
]

BRUTE_FORCE_MAX_N = 9
RYSER_MAX_N = 30


def permutation_weights(m) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Enumerate every permutation and its weight.

    Permutations are returned as column -> row maps ``perm`` with weight
    ``prod_c m[perm[c], c]``, in lexicographic order.
    """
    m = as_matrix(m)
    n = m.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise DimensionTooLarge(f"enumeration limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    perms = list(itertools.permutations(range(n)))
    cols = np.arange(n)
    weights = np.array([np.prod(m[list(p), cols]) for p in perms])
    return perms, weights


def permanent_brute_force(m) -> float:
    """Sum of ``prod_j m[j, sigma(j)]`` over all ``n!`` permutations."""
    m = as_matrix(m)
    n = m.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise DimensionTooLarge(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    rows = range(n)
    return math.fsum(
        math.prod(m[j, sigma[j]] for j in rows) for sigma in itertools.permutations(rows)
    )


@numba.njit(cache=True)
def _ryser_gray(m):
    n = m.shape[0]
    row_sums = np.zeros(n)
    total = 0.0
    comp = 0.0  # Kahan compensation
    in_set = np.zeros(n, dtype=np.bool_)
    size = 0
    for k in range(1, 1 << n):
        # column toggled between consecutive Gray codes = trailing zeros of k
        j = 0
        while not (k >> j) & 1:
            j += 1
        if in_set[j]:
            in_set[j] = False
            size -= 1
            for i in range(n):
                row_sums[i] -= m[i, j]
        else:
            in_set[j] = True
            size += 1
            for i in range(n):
                row_sums[i] += m[i, j]
        prod = 1.0
        for i in range(n):
            prod *= row_sums[i]
        term = prod if (n - size) % 2 == 0 else -prod
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def has_perfect_matching(m) -> bool:
    """True iff the support of ``m`` admits a permutation, i.e. ``per(m) > 0``."""
    match = maximum_bipartite_matching(csr_matrix(np.asarray(m) > 0), perm_type="column")
    return bool(np.all(match >= 0))


def permanent_ryser(m) -> float:
    """Permanent via Ryser's inclusion-exclusion formula in Gray-code order.

    Each subset step updates the row sums with a single column, so the cost
    is ``O(n 2^n)``.
    """
    m = as_matrix(m)
    n = m.shape[0]
    if n > RYSER_MAX_N:
        raise DimensionTooLarge(f"Ryser limited to n <= {RYSER_MAX_N}, got {n}")
    if not has_perfect_matching(m):
        # inclusion-exclusion would leave a rounding residue instead of 0
        return 0.0
    return max(float(_ryser_gray(np.ascontiguousarray(m))), 0.0)


def permanent_block_diagonal(m, k: int) -> float:
    """Permanent of a block-diagonal matrix as the product of block permanents.

    The block layout is ``n // k`` blocks of size ``k`` followed by one block
    of size ``n % k``. Every entry outside the blocks must be zero.
    """
    m = as_matrix(m)
    n = m.shape[0]
    if not 1 <= k <= n:
        raise NotBlockDiagonal(f"block size {k} invalid for n={n}")
    mask = np.zeros((n, n), dtype=bool)
    blocks = block_layout(n, k)
    for start, size in blocks:
        mask[start:start + size, start:start + size] = True
    if np.any(m[~mask] != 0):
        raise NotBlockDiagonal(f"matrix has non-zero entries outside the {k}x{k} block layout")
    result = 1.0
    for start, size in blocks:
        result *= permanent_ryser(m[start:start + size, start:start + size])
    return result
