"""How much sampling tightens the permanent bound.

Whenever a trial is rejected, the slack it landed in is known to hold no
permutations, so it is removed from the bound of that node and of all its
ancestors. The root bound therefore decreases over time.
"""

# %%
import math

import numpy as np

from adapart import PermutationSampler, permanent_ryser, uniform_matrix

for n in (10, 15):
    A = uniform_matrix(n, seed=0)
    s = PermutationSampler(A, tighten=True)
    start = s.root_log_ub
    rng = np.random.default_rng(0)
    for k in (10, 100, 1000):
        while s.stats.accepted < k:
            s.draw(rng)
        print(f"n={n}: after {k:4d} draws the bound is {math.exp(s.root_log_ub - start):.3f} of the original")
    if n <= 12:
        print(f"       the permanent itself is {math.exp(math.log(permanent_ryser(A)) - start):.3f} of it")
