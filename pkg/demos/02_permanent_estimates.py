"""Permanent estimates with confidence intervals.

The acceptance probability of one rejection trial is ``per(A) / Z_ub``, so
counting accepts gives an unbiased estimate and an exact binomial interval.
With bound tightening the envelope shrinks as we go and a bootstrap supplies
the interval. A block-diagonal matrix has an exactly known permanent (the
product of its block permanents), which makes it a good yardstick at sizes
where Ryser's formula on the whole matrix is hopeless.
"""

# %%
import math

from adapart import (
    block_diagonal_matrix,
    estimate_fixed_bound,
    estimate_tightening,
    permanent_block_diagonal,
    permanent_ryser,
    soules_upper_bound,
    uniform_matrix,
)

# %% a small dense matrix: Clopper-Pearson interval
A = uniform_matrix(8, seed=0)
truth = math.log(permanent_ryser(A))
report = estimate_fixed_bound(A, trials=5000, alpha=0.05, rng=0)
print(f"log per = {truth:.4f}")
print(f"bound   = {soules_upper_bound(A, range(8), range(8)).log_value:.4f}")
print(f"estimate {report.log_point_estimate:.4f}  95% [{report.log_lower:.4f}, {report.log_upper:.4f}]")

# %% block diagonal, 10 accepted samples, tightened bounds
for n in (20, 30, 40):
    B = block_diagonal_matrix(n, 10, seed=n)
    truth = math.log(permanent_block_diagonal(B, 10))
    r = estimate_tightening(B, accepted=10, rng=n, bootstrap_b=100_000)
    print(
        f"n={n}: log per {truth:7.3f}  interval [{r.log_lower:7.3f}, {r.log_upper:7.3f}]  "
        f"trials {r.trials}  bound {r.per_trial_root_log_ub[0]:.2f} -> {r.per_trial_root_log_ub[-1]:.2f}"
    )
