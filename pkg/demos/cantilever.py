"""
Multimaterial cantilever
========================

Clamp the left edge of a 2x1 plate and pull down at the middle of the right edge. Each
element may hold any catalog composite of a strong material, a weaker cheaper one and
void; the design minimises compliance plus material cost. The result is written as a
colour image where black is the strong material.
"""

import sys

import numpy as np

from multimat.topopt import DesignProblem, baselines, export_design, solve_design

# pass "full" for the 160x80 mesh; the default is a quick coarse run
full = len(sys.argv) > 1 and sys.argv[1] == "full"
pr = DesignProblem() if full else DesignProblem(nx=80, ny=40, table_r=20, table_phi=5)

design, history = solve_design(pr)
print(f"{len(history) - 1} iterations, converged={design.converged}")
print(f"objective {history[0]:.5f} -> {history[-1]:.5f}")
for name, val in baselines(pr).items():
    print(f"  uniform {name:>6}: {val:.5f}")

labels, counts = np.unique(design.labels, return_counts=True)
for lab, n in sorted(zip(labels, counts), key=lambda x: -x[1]):
    print(f"  {lab:>12}: {n}")

for path in export_design(design, "cantilever", history):
    print("wrote", path)
