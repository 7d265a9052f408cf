"""
The analytic identities behind the density argument
===================================================

Each step of the proof is an identity that can be checked in floating
point: the Laplacian recursion, an exponential series, a Gamma transform,
an alternating Gaussian series and two mollification limits.
"""

from rieszfit import calculus, verifier
from rieszfit.kernel import KernelSpec

report = verifier.run_identity_checks(d=1)
for c in report.checks:
    print(f"{'ok  ' if c.passed else 'FAIL'} {c.name:40s} {c.measured:.3e}  (tol {c.tolerance:g})")

# The Gamma transform lands on exponent n - 2r + 2m + 2
spec = KernelSpec(1, -0.5)
for m in (-0.5, 0.0, 1.5):
    print(f"m={m}: measured slope {calculus.gamma_transform_slope(spec, 0, m, 3.0):.9f}")

# Where the alternating Gaussian series cannot be trusted
chk = calculus.gaussian_series_check(0.5, 3.0, 60)
print("t=0.5, rho=3:", chk.partial, "vs", chk.closed, "flagged:", chk.cancellation)
