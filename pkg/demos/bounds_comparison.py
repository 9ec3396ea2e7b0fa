"""
Bounds for three-material mixtures with void
============================================

Compare the Wiener, Hashin-Shtrikman and the sharper three-material bound on the
effective compliance, then check the numerical translation bound against the
closed form at one point in each branch.
"""

import math

from multimat import (
    PhaseSet,
    StressTensor,
    hs_bound,
    modified_translation_bound,
    three_material_bound,
    three_material_thresholds,
    wiener_bound,
)

k1, k2 = 1.0, 2.0

# for m2 = 0.3 the thresholds split the m1 axis into three branches
m2 = 0.3
m11, m12 = three_material_thresholds(k1, k2, m2)
print(f"m2={m2}: branch thresholds m12={m12:.5f} m11={m11:.5f}")

print(f"{'m1':>6} {'wiener':>10} {'hs':>10} {'b2':>10} branch")
for m1 in (0.02, 0.05, 0.1, 0.2, 0.4, 0.7):
    ps = PhaseSet.from_lists([k1, k2, math.inf], [m1, m2, 1 - m1 - m2])
    val, br = three_material_bound(k1, k2, m1, m2)
    print(f"{m1:6.2f} {wiener_bound(ps):10.5f} {hs_bound(ps):10.5f} {val:10.5f} {br}")

# the HS bound still remembers the strong phase when none of it is present
for ka in (0.5, 1.0):
    print(f"hs at m1=0 with k1={ka}: {hs_bound(PhaseSet.from_lists([ka, k2, math.inf], [0, 0.5, 0.5])):.4f}")

# numerical bound with cone and mean-field constraints, one point per branch
s = 1.0
sigma = StressTensor.isotropic(s)
for m1, m2 in ((0.5, 0.2), (0.12, 0.5), (0.05, 0.3)):
    ps = PhaseSet.from_lists([k1, k2, math.inf], [m1, m2, 1 - m1 - m2])
    exact, br = three_material_bound(k1, k2, m1, m2)
    res = modified_translation_bound(ps, sigma)
    kap = res.value / s ** 2  # energy 0.5 * kappa * Tr(sigma^2) = kappa s^2
    print(f"branch {br}: closed form {exact:.6f}  numerical {kap:.6f}  t_opt {res.t_opt:.3f}")
