"""
Approximating a target by potentials of exterior sources
========================================================

Any smooth function on the unit ball can be approximated, in C^k, by
``K_n g`` where ``g`` lives in the annulus 3 < |x| < 4. Here we watch the
residual fall as the atom basis grows, and the source coefficients explode.
"""

import numpy as np

from rieszfit.expressions import TargetSpec
from rieszfit.fitter import fit_schedule, residual_curve
from rieszfit.kernel import KernelSpec
from rieszfit.sources import build_grid, potential_on_grid

spec = KernelSpec(d=1, n=-0.5)
target = TargetSpec("y1^2", 1)

results = fit_schedule(spec, target, k=0, epsilon=None, schedule=(8, 16, 32, 64))

print("atoms  residual     |c|          rank")
for atoms, res, norm, rank in residual_curve(results):
    print(f"{atoms:5d}  {res:.3e}  {norm:.3e}  {rank}")

# The potential reproduces y^2 on the ball, yet the sources are enormous.
grid = build_grid(1, 0, spacing=0.25)
fitted = potential_on_grid(spec, results[-1].density, grid)[0]
for y, v in zip(grid.points[:, 0], fitted):
    print(f"y={y:+.2f}  K_n g = {v:+.8f}   y^2 = {y * y:.8f}")

# Same thing in C^1 with a less friendly target; the rank saturates early.
sin_fit = fit_schedule(spec, TargetSpec("sin(pi*y1)", 1), k=1, epsilon=None)
print("sin(pi y), k=1 final residual:", sin_fit[-1].residual_ck)

# Residual measured on a twice finer grid, to see how honest the grid norm is
fine = build_grid(1, 0).refined()
diff = target.table(fine) - potential_on_grid(spec, results[-1].density, fine)
print("residual on refined grid:", np.abs(diff).max())
