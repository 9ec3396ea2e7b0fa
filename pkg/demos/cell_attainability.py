"""
Do real microstructures reach the bounds?
=========================================

Rasterise a second-rank laminate and coated circles on a periodic cell, homogenise them
with bilinear finite elements, and compare with the bound and the analytic laminate value.
"""

from multimat.cellfem import CellGrid, attainability_report, homogenize, rasterize_laminate
from multimat.laminate import optimize_at_fractions
from multimat import PhaseSet, StressTensor, hs_bound

# the catalog answer for a 50/50 two-phase mix under hydrostatic stress
two = PhaseSet.from_lists([1.0, 2.0], [0.5, 0.5])
choice = optimize_at_fractions("L(12,1)", two, StressTensor.isotropic(1.0), (0.5, 0.5))
print(f"hs bound {hs_bound(two):.6f}, laminate {choice.value:.6f}")

# the same structure in pixels
grid = rasterize_laminate(choice.structure, (1.0, 2.0), 128)
print("pixel fractions", grid.fractions())
print("effective stiffness (Mandel)\n", homogenize(grid).stiffness.round(5))

for row in attainability_report({"n": 96}):
    print(f"{row['structure']:>16}: bound {row['bound']:.5f} catalog {row['catalog']:.5f} "
          f"fem {row['fem']:.5f}  gap {100 * row['gap_bound_fem']:.2f}%")
