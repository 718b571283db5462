"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code: each oracle recomputes
its quantity from definitions (enumeration, exact binomial tail sums,
closed-form scalar algebra).
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import stats


def permutation_distribution(m) -> dict[tuple[int, ...], float]:
    """``{perm: w(perm) / per(m)}`` over positive-weight column -> row maps."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    weights = {}
    for perm in itertools.permutations(range(n)):
        w = math.prod(m[perm[c], c] for c in range(n))
        if w > 0:
            weights[perm] = w
    total = math.fsum(weights.values())
    return {p: w / total for p, w in weights.items()}


def permanent_enumeration(m) -> float:
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    return math.fsum(math.prod(m[p[c], c] for c in range(n)) for p in itertools.permutations(range(n)))


def chi_square_pvalue(samples, dist) -> float:
    """Goodness of fit of sampled permutations against ``dist``.

    Permutations outside the support make the p-value 0.
    """
    keys = sorted(dist)
    index = {p: i for i, p in enumerate(keys)}
    counts = np.zeros(len(keys))
    for s in samples:
        i = index.get(tuple(int(v) for v in s))
        if i is None:
            return 0.0
        counts[i] += 1
    expected = np.array([dist[p] for p in keys]) * counts.sum()
    if len(keys) == 1:
        return 1.0
    return float(stats.chisquare(counts, expected).pvalue)


def minc_bregman(m) -> float:
    """``prod_i (r_i!)^(1/r_i)`` for a 0/1 matrix with row degrees ``r_i``."""
    out = 1.0
    for r in np.asarray(m).sum(axis=1).astype(int):
        out *= math.factorial(r) ** (1.0 / r) if r else 0.0
    return out


def binom_upper_tail(a: int, T: int, p: float) -> float:
    """``P(Bin(T, p) >= a)`` by exact summation."""
    return math.fsum(math.comb(T, j) * p**j * (1 - p) ** (T - j) for j in range(a, T + 1))


def binom_lower_tail(a: int, T: int, p: float) -> float:
    """``P(Bin(T, p) <= a)`` by exact summation."""
    return math.fsum(math.comb(T, j) * p**j * (1 - p) ** (T - j) for j in range(0, a + 1))


def _bisect(f, lo, hi, iters=200):
    # f increasing with a sign change on [lo, hi]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clopper_pearson_bisection(a: int, T: int, alpha: float) -> tuple[float, float]:
    """Exact interval by inverting the binomial tails with bisection."""
    lo = 0.0 if a == 0 else _bisect(lambda p: binom_upper_tail(a, T, p) - alpha / 2, 0.0, 1.0)
    hi = 1.0 if a == T else _bisect(lambda p: alpha / 2 - binom_lower_tail(a, T, p), 0.0, 1.0)
    return lo, hi


def scalar_kalman(m, P, y, F, Q, H, R):
    """Predict-free scalar update followed by prediction, by hand."""
    S = H * P * H + R
    K = P * H / S
    m_post = m + K * (y - H * m)
    P_post = (1 - K * H) * P
    loglik = -0.5 * (math.log(2 * math.pi * S) + (y - H * m) ** 2 / S)
    return m_post, P_post, loglik, F * m_post, F * P_post * F + Q
