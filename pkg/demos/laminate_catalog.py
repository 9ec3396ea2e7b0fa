"""
Laminate catalog and the map of optimal structures
==================================================

Every catalog structure is a nested laminate. For an anisotropic load the cheapest
structure depends on both principal stresses; this script prints the winner on a
coarse grid of eigenvalues, which is a text version of the regime map.
"""

import math

import numpy as np

from multimat import PhaseSet, StressTensor, best_in_catalog, regime_map

ps = PhaseSet.from_lists([1.0, 2.0, math.inf])
gamma = 0.6

# a single load: report the structure, fractions and layer parameters
ch = best_in_catalog(ps, StressTensor.diag(0.9, 0.2), gamma)
print(f"load diag(0.9, 0.2): {ch.label}, fractions {np.round(ch.fractions, 4)}, value {ch.value:.6f}")

lam = np.linspace(0.1, 1.5, 8)
grid = regime_map(ps, gamma, lam, lam)
width = max(len(x) for x in grid.ravel())
print("rows: lam2, columns: lam1")
print(" " * 6 + " ".join(f"{x:>{width}.2f}" for x in lam))
for j, l2 in enumerate(lam):
    print(f"{l2:5.2f} " + " ".join(f"{grid[i, j]:>{width}}" for i in range(len(lam))))
