"""Permanent estimates and high-probability bounds from accept/reject counts.

Every trial of the rejection sampler is accepted with probability
``per(A) / Z_ub``, where ``Z_ub`` is the root bound in force when the trial
starts. With a constant bound the accepted count is binomial, which gives an
unbiased estimate ``(a / T) * Z_ub`` and exact Clopper-Pearson bounds. With
bound tightening the estimate becomes ``a / sum_i 1 / Z_ub_i`` and the bounds
come from a nonparametric bootstrap over trials.

All permanent-scale quantities are natural logarithms.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateBootstrap, InvalidArgs
from .sampler import PermutationSampler, _Uniforms

__all__ = [
    "EstimateReport",
    "Method",
    "bound_improvement_ratio",
    "clopper_pearson",
    "estimate_fixed_bound",
    "estimate_tightening",
    "tightened_log_estimate",
]

TRIAL_CHUNK = 4096


class Method(str, enum.Enum):
    CLOPPER_PEARSON = "clopper-pearson"
    BOOTSTRAP = "bootstrap"


@dataclass
class EstimateReport:
    trials: int
    accepted: int
    log_point_estimate: float | None
    log_lower: float
    log_upper: float
    confidence: float
    method: Method
    per_trial_root_log_ub: np.ndarray = field(repr=False)

    CSV_FIELDS = (
        "method",
        "trials",
        "accepted",
        "confidence",
        "log_point_estimate",
        "log_lower",
        "log_upper",
        "initial_root_log_ub",
        "final_root_log_ub",
    )

    def as_dict(self) -> dict:
        roots = self.per_trial_root_log_ub
        return {
            "method": self.method.value,
            "trials": self.trials,
            "accepted": self.accepted,
            "confidence": self.confidence,
            "log_point_estimate": self.log_point_estimate,
            "log_lower": self.log_lower,
            "log_upper": self.log_upper,
            "initial_root_log_ub": float(roots[0]) if len(roots) else None,
            "final_root_log_ub": float(roots[-1]) if len(roots) else None,
        }

    def to_record(self) -> str:
        """Flat ``key=value`` lines, one per field."""
        lines = []
        for key, value in self.as_dict().items():
            lines.append(f"{key}={_fmt(value)}")
        return "\n".join(lines) + "\n"

    def to_csv_row(self) -> str:
        d = self.as_dict()
        return ",".join(_fmt(d[k]) for k in self.CSV_FIELDS)

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.CSV_FIELDS)


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def clopper_pearson(a: int, T: int, alpha: float) -> tuple[float, float]:
    """Exact two-sided ``1 - alpha`` binomial interval for ``a`` successes in ``T``."""
    if not (isinstance(a, (int, np.integer)) and isinstance(T, (int, np.integer))):
        raise InvalidArgs("a and T must be integers")
    if T < 1 or not 0 <= a <= T:
        raise InvalidArgs(f"need 0 <= a <= T and T >= 1, got a={a}, T={T}")
    if not 0 < alpha < 1:
        raise InvalidArgs(f"alpha must lie in (0, 1), got {alpha}")
    lo = 0.0 if a == 0 else float(stats.beta.ppf(alpha / 2, a, T - a + 1))
    hi = 1.0 if a == T else float(stats.beta.ppf(1 - alpha / 2, a + 1, T - a))
    return lo, hi


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _chunk_probe(m, method, trials, seed_seq):
    sampler = PermutationSampler(m, method)
    return sampler.probe(trials, np.random.default_rng(seed_seq))


def estimate_fixed_bound(
    m,
    trials: int,
    alpha: float = 0.05,
    rng=None,
    method: str = "adapart",
    threads: int = 1,
    sampler: PermutationSampler | None = None,
) -> EstimateReport:
    """Unbiased estimate and Clopper-Pearson interval with a constant bound.

    When ``sampler`` is given its trials run in the calling thread with
    ``rng`` directly. Otherwise the trials are split into fixed-size chunks,
    each with its own generator spawned from ``rng``, so the result does not
    depend on ``threads``.
    """
    if trials < 1:
        raise InvalidArgs("trials must be at least 1")
    if not 0 < alpha < 1:
        raise InvalidArgs(f"alpha must lie in (0, 1), got {alpha}")
    rng = np.random.default_rng(rng)
    if sampler is not None:
        if sampler.tighten:
            raise InvalidArgs("fixed-bound estimation needs a sampler without tightening")
        probes = [sampler.probe(trials, rng)]
        root = sampler.root_log_ub
    else:
        sizes = [TRIAL_CHUNK] * (trials // TRIAL_CHUNK)
        if trials % TRIAL_CHUNK:
            sizes.append(trials % TRIAL_CHUNK)
        seeds = np.random.SeedSequence(int(rng.integers(2**63))).spawn(len(sizes))
        if threads > 1 and len(sizes) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                probes = list(pool.map(lambda a: _chunk_probe(m, method, *a), zip(sizes, seeds)))
        else:
            probes = [_chunk_probe(m, method, t, s) for t, s in zip(sizes, seeds)]
        root = float(probes[0].per_trial_root_log_ub[0])
    a = sum(p.accepted for p in probes)
    roots = np.concatenate([p.per_trial_root_log_ub for p in probes])
    p_lo, p_hi = clopper_pearson(a, trials, alpha)
    point = math.log(a / trials) + root if a > 0 else None
    return EstimateReport(
        trials,
        a,
        point,
        _safe_log(p_lo) + root,
        _safe_log(p_hi) + root,
        1 - alpha,
        Method.CLOPPER_PEARSON,
        roots,
    )


def tightened_log_estimate(outcomes, root_log_ubs) -> float:
    """``log(a / sum_i exp(-root_i))`` for per-trial outcomes and root bounds."""
    outcomes = np.asarray(outcomes, dtype=bool)
    roots = np.asarray(root_log_ubs, dtype=float)
    a = int(outcomes.sum())
    if a == 0:
        return -math.inf
    c = roots.min()
    return math.log(a) + float(c) - math.log(float(np.exp(-(roots - c)).sum()))


def _bootstrap_log_estimates(outcomes, roots, B, rng, chunk=None):
    T = len(outcomes)
    c = roots.min()
    inv = np.exp(-(roots - c))
    ind = outcomes.astype(np.float64)
    chunk = chunk or max(1, min(B, 2**24 // max(T, 1)))
    out = np.empty(B)
    done = 0
    while done < B:
        b = min(chunk, B - done)
        idx = rng.integers(0, T, size=(b, T))
        a_star = ind[idx].sum(axis=1)
        s_star = inv[idx].sum(axis=1)
        with np.errstate(divide="ignore"):
            out[done:done + b] = np.log(a_star) + c - np.log(s_star)
        done += b
    return out


def estimate_tightening(
    m,
    trials: int | None = None,
    alpha: float = 0.05,
    rng=None,
    bootstrap_b: int = 100_000,
    accepted: int | None = None,
    method: str = "adapart",
    sampler: PermutationSampler | None = None,
    max_trials: int | None = None,
) -> EstimateReport:
    """Estimate with bound tightening and a bootstrap interval.

    Runs ``trials`` attempts, or, when ``accepted`` is given instead, keeps
    going until that many attempts have been accepted. Each replicate
    resamples the ``(outcome, root bound)`` pairs of all attempts with
    replacement; the interval is the empirical ``alpha/2`` and
    ``1 - alpha/2`` quantiles of the replicate estimates.

    Raises
    ------
    DegenerateBootstrap
        When no attempt was accepted; the exception carries an upper bound
        in ``log_upper`` derived from the final root bound.
    """
    if (trials is None) == (accepted is None):
        raise InvalidArgs("give exactly one of trials or accepted")
    if not 0 < alpha < 1:
        raise InvalidArgs(f"alpha must lie in (0, 1), got {alpha}")
    if bootstrap_b < 1:
        raise InvalidArgs("bootstrap_b must be at least 1")
    rng = np.random.default_rng(rng)
    if sampler is None:
        sampler = PermutationSampler(m, method, tighten=True)
    elif not sampler.tighten:
        raise InvalidArgs("sampler must have tightening enabled")

    outcomes: list[bool] = []
    roots: list[float] = []
    a = 0
    uniform = _Uniforms(rng)
    while True:
        if trials is not None and len(outcomes) >= trials:
            break
        if accepted is not None and a >= accepted:
            break
        if max_trials is not None and len(outcomes) >= max_trials:
            break
        perm, root, _ = sampler.trial(uniform)
        outcomes.append(perm is not None)
        roots.append(root)
        a += perm is not None

    outcomes_arr = np.array(outcomes, dtype=bool)
    roots_arr = np.array(roots)
    T = len(outcomes_arr)
    if a == 0:
        err = DegenerateBootstrap(f"no accepted trials out of {T}")
        err.log_upper = float(sampler.root_log_ub)
        raise err
    point = tightened_log_estimate(outcomes_arr, roots_arr)
    reps = _bootstrap_log_estimates(outcomes_arr, roots_arr, bootstrap_b, rng)
    lo = float(np.quantile(reps, alpha / 2, method="lower"))
    hi = float(np.quantile(reps, 1 - alpha / 2, method="higher"))
    return EstimateReport(T, a, point, lo, hi, 1 - alpha, Method.BOOTSTRAP, roots_arr)


def bound_improvement_ratio(m, num_draws: int, rng=None, tighten_policy: str = "reject") -> float:
    """Final over initial root bound after ``num_draws`` accepted draws with tightening."""
    sampler = PermutationSampler(m, "adapart", tighten=True, tighten_policy=tighten_policy)
    initial = sampler.root_log_ub
    sampler.draws(num_draws, np.random.default_rng(rng))
    return math.exp(sampler.root_log_ub - initial)
