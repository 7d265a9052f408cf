"""
Fractional harmonic functions without a Harnack inequality
==========================================================

Fit ``|y|^2 + 1e-3`` (almost zero at the origin) ever more tightly with
potentials that are s-harmonic in the unit ball. Each fit is positive on
the half ball, but sup/inf grows without bound as the tolerance shrinks.
"""

from rieszfit.kernel import KernelSpec
from rieszfit.verifier import harnack_probe, harnack_ratios_increasing

spec = KernelSpec(d=1, n=-0.5)   # n = 2s - d with s = 1/4

records = harnack_probe(spec, epsilons=(1e-1, 3e-2, 1e-2, 3e-3))
for r in records:
    print(f"eps={r.epsilon_target:<6g} sup={r.sup_value:.4f} inf={r.inf_value:.5f} "
          f"ratio={r.ratio:8.2f} atoms={r.atoms_used} |c|={r.coefficient_norm:.2e}")

print("ratios strictly increasing:", harnack_ratios_increasing(records))
