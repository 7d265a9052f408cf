"""
Checking s-harmonicity with a singular integral
===============================================

We apply the fractional Laplacian, written as a singular integral of second
differences, first to textbook inputs and then to a fitted potential.
"""

import math

import numpy as np

from rieszfit import verifier as V
from rieszfit.expressions import TargetSpec
from rieszfit.fitter import fit_schedule
from rieszfit.kernel import KernelSpec

# A Gaussian: its fractional Laplacian at 0 is 4^s Gamma(s + 1/2) / sqrt(pi)
gauss = V.FunctionField(1, lambda x: np.exp(-x[:, 0] ** 2),
                        lambda x: ((4 * x[:, 0] ** 2 - 2) * np.exp(-x[:, 0] ** 2))[:, None, None])
for s in (0.25, 0.5, 0.75):
    num = V.fractional_laplacian(gauss, [0.0], V.FracLapSpec(s)).value
    print(f"s={s}: numeric {num:.12f}  closed form {4**s * math.gamma(s + .5) / math.sqrt(math.pi):.12f}")

# (1 - x^2)_+^{1/2} has constant half-Laplacian on (-1, 1)
semi = V.FunctionField(1, lambda x: np.sqrt(np.clip(1 - x[:, 0] ** 2, 0, None)),
                       lambda x: (-(1 - x[:, 0] ** 2) ** -1.5)[:, None, None], kinks=(1.0,))
print("semicircle:", [round(V.fractional_laplacian(semi, [y], V.FracLapSpec(0.5)).value, 6)
                      for y in (0.0, 0.4, 0.8)])

# Constant in u = c K_{2s-d} g, calibrated on a single bump
cal = V.riesz_normalization(1, 0.25)
print("calibrated c:", cal.constant, " 1/sqrt(2 pi):", 1 / math.sqrt(2 * math.pi))

# A fitted potential is s-harmonic inside the ball, not inside the annulus
fit = fit_schedule(KernelSpec(1, -0.5), TargetSpec("y1^2", 1), 0, None)[-1]
rec = V.harmonicity_check(fit.density, s=0.25)
print("probe values:", rec.probe_values)
print("annulus value:", rec.annulus_value, "relative:", rec.relative)
