"""
Cost of the weight computation and size of the mapping space
============================================================

W_MAP needs one weight per gate pair, so the work grows with the square of
the gate count. The number of ways an adversary can match pseudonyms grows
factorially, and each exclusion rule cuts it down.
"""

import timeit

import numpy as np

from mixzone import StateMatrix, compute_wmap, count_feasible_mappings

for n in (2, 4, 8, 16, 32, 64):
    rng = np.random.default_rng(n)
    p = rng.dirichlet(np.ones(n), size=n)
    state = StateMatrix(rng.integers(1, 12, n), rng.integers(0, 12, n))
    wm = compute_wmap(state, p)
    t = min(timeit.repeat(lambda: compute_wmap(state, p), number=10, repeat=5)) / 10
    print(f"n={n:>2}  evaluations={wm.evaluations:>5}  {t * 1e3:.3f} ms")

###############################################################################
# Counting matchings: all pairs allowed, then with some pairs ruled out.
full = np.ones((6, 6), dtype=bool)
print("6 vehicles, no constraints:", count_feasible_mappings(full))
pruned = full.copy()
pruned[np.triu_indices(6, k=3)] = False
print("with far pairs excluded:   ", count_feasible_mappings(pruned))
