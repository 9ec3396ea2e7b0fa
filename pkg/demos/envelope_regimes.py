"""
The cost-weighted energy envelope under hydrostatic load
========================================================

Three materials: a strong one (compliance 1, cost 1), a weaker one (compliance 2,
cost gamma) and free void. Under the load ``s * I`` the cheapest optimal composite
changes with ``s``. This script walks ``s`` upwards and prints where the optimal
fractions, the structure and the regime change.
"""

import numpy as np

from multimat import envelope_eval, gamma_interval, thresholds

k1, k2 = 1.0, 2.0

# three-material designs are optimal only for a window of intermediate costs
ga, gb = gamma_interval(k1, k2)
print(f"three-material window: {ga:.4f} <= gamma <= {gb:.4f}")

gamma = 0.6
r1, r2, r3 = thresholds(k1, k2, gamma)
print(f"regime thresholds: {r1:.5f} {r2:.5f} {r3:.5f}")

print(f"{'s':>6} {'regime':>6} {'m1':>8} {'m2':>8} {'QF':>9} {'strain':>8}  structure")
prev = None
for s in np.linspace(0.0, 1.5, 31):
    p = envelope_eval(s, k1, k2, gamma)
    mark = "" if p.regime == prev else "  <-"
    prev = p.regime
    print(f"{s:6.2f} {p.regime:>6} {p.m[0]:8.4f} {p.m[1]:8.4f} {p.value:9.5f} {p.strain:8.4f}  {p.structure}{mark}")

# the strain is not monotone in the load: it drops inside U1 and U3
