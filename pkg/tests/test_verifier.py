import json
import math

import numpy as np
import pytest
from scipy import integrate

from rieszfit import verifier as V
from rieszfit.fitter import fit_schedule
from rieszfit.expressions import TargetSpec
from rieszfit.kernel import KernelSpec
from rieszfit.sources import BumpAtom, SourceDensity, build_grid


def gaussian(d, shift=0.0):
    c = np.zeros(d)
    c[0] = shift

    def f(x):
        return np.exp(-np.sum((x - c) ** 2, axis=1))

    def h(x):
        z = x - c
        e = np.exp(-np.sum(z * z, axis=1))
        return e[:, None, None] * (4 * z[:, :, None] * z[:, None, :] - 2 * np.eye(d))
    return V.FunctionField(d, f, h)


def semicircle():
    f = lambda x: np.sqrt(np.clip(1 - x[:, 0] ** 2, 0, None))
    h = lambda x: (-(1 - x[:, 0] ** 2) ** -1.5)[:, None, None]
    return V.FunctionField(1, f, h, kinks=(1.0,))


def brute_force_1d(func, y, s):
    """-C(1,s) int_0^inf (u(y+z) + u(y-z) - 2u(y)) z^{-1-2s} dz by adaptive quadrature."""
    g = lambda z: (func(y + z) + func(y - z) - 2 * func(y)) * z ** (-1 - 2 * s)
    pts = sorted({abs(1 - y), abs(1 + y)})
    edges = [0.0] + pts + [50.0]
    total = sum(integrate.quad(g, a, b, epsabs=0, epsrel=1e-11, limit=500)[0] for a, b in zip(edges, edges[1:]))
    total += integrate.quad(g, 50.0, np.inf, epsabs=1e-14, limit=500)[0]
    return -V.FracLapSpec(s).constant * total


def test_spec_invariants():
    with pytest.raises(ValueError):
        V.FracLapSpec(1.0)
    with pytest.raises(ValueError):
        V.FracLapSpec(0.5, delta=1.5)
    assert V.FracLapSpec(0.25, 1).n == -0.5


def test_constant_is_annihilated():
    for s in (0.2, 0.5, 0.9):
        assert abs(V.fractional_laplacian(V.constant_field(1, 3.7), [0.3], V.FracLapSpec(s)).value) <= 1e-8
    assert abs(V.fractional_laplacian(V.constant_field(2, -2.0), [0.1, 0.2], V.FracLapSpec(0.5, 2)).value) <= 1e-8


@pytest.mark.parametrize("d,s", [(1, 0.25), (1, 0.5), (1, 0.75), (2, 0.3), (2, 0.6)])
def test_gaussian_against_fourier_closed_form(d, s):
    exact = 4**s * math.gamma(s + d / 2) / math.gamma(d / 2)
    res = V.fractional_laplacian(gaussian(d), np.zeros(d), V.FracLapSpec(s, d))
    assert res.value == pytest.approx(exact, rel=1e-7)
    assert not res.accuracy_warning


@pytest.mark.parametrize("y", [0.0, 0.3, 0.6])
def test_semicircle_against_brute_force(y):
    func = lambda x: math.sqrt(max(1 - x * x, 0.0))
    ref = brute_force_1d(func, y, 0.5)
    val = V.fractional_laplacian(semicircle(), [y], V.FracLapSpec(0.5)).value
    assert val == pytest.approx(ref, rel=1e-3)
    # the known closed form of this pair is the constant 1
    assert val == pytest.approx(1.0, rel=1e-5)


def test_linearity():
    u, v = gaussian(1), gaussian(1, shift=0.4)
    spec = V.FracLapSpec(0.4)
    a, b = 1.7, -0.6
    combo = V.fractional_laplacian(V.CombinedField([(a, u), (b, v)]), [0.2], spec).value
    parts = a * V.fractional_laplacian(u, [0.2], spec).value + b * V.fractional_laplacian(v, [0.2], spec).value
    assert combo == pytest.approx(parts, rel=1e-8)


def test_translation_consistency():
    spec = KernelSpec(1, -0.5)
    h = 0.05
    g = SourceDensity(spec, (BumpAtom((3.5,), 0.3), BumpAtom((-3.4,), 0.2)), [1.0, -0.4])
    g_shift = SourceDensity(spec, (BumpAtom((3.5 + h,), 0.3), BumpAtom((-3.4 + h,), 0.2)), [1.0, -0.4])
    fspec = V.FracLapSpec(0.25)
    y = 0.2
    a = V.fractional_laplacian(V.PotentialField(g_shift), [y], fspec).value
    b = V.fractional_laplacian(V.PotentialField(g), [y - h], fspec).value
    scale = abs(V.fractional_laplacian(V.PotentialField(g), [3.5], fspec, check_domain=False).value)
    assert abs(a - b) <= 1e-6 * max(abs(b), scale)
    gs = V.fractional_laplacian(gaussian(1, shift=h), [y], fspec).value
    g0 = V.fractional_laplacian(gaussian(1), [y - h], fspec).value
    assert gs == pytest.approx(g0, rel=1e-6)


def test_preconditions():
    spec = KernelSpec(1, -0.5)
    u = V.PotentialField(SourceDensity(spec, (BumpAtom((3.5,), 0.3),), [1.0]))
    with pytest.raises(V.PreconditionError):
        V.fractional_laplacian(u, [0.95], V.FracLapSpec(0.25))
    with pytest.raises(ValueError):
        V.fractional_laplacian(u, [0.0], V.FracLapSpec(0.4))


def test_calibration_matches_textbook_constant():
    cal = V.riesz_normalization(1, 0.25)
    assert cal.relative_gap <= 1e-2
    # regression baseline from the verified calibration run
    assert cal.constant == pytest.approx(0.398942280403, rel=1e-9)
    assert cal.constant == pytest.approx(V.riesz_constant_reference(1, 0.25), rel=1e-8)
    assert cal.constant == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-8)


def test_calibration_amplitude_invariance():
    a = V.riesz_normalization(1, 0.25).constant
    b = V.riesz_normalization(1, 0.25, amplitude=7.5).constant
    assert b == pytest.approx(a, rel=1e-10)


def test_calibration_two_dimensions():
    cal = V.riesz_normalization(2, 0.5, frac_spec=V.FracLapSpec(0.5, 2, angular=16))
    assert cal.constant == pytest.approx(1 / (2 * math.pi), rel=1e-6)


def test_calibration_constant_kernel_fails():
    with pytest.raises(V.CalibrationError):
        V.riesz_normalization(1, 0.5)


def test_harmonicity_of_fitted_density():
    result = fit_schedule(KernelSpec(1, -0.5), TargetSpec("y1^2", 1), 0, None, (8, 16))[-1]
    rec = V.harmonicity_check(result.density, 0.25)
    assert len(rec.probe_points) == 5
    assert np.all(np.abs(rec.probe_points) <= 0.5)
    assert rec.relative <= 1e-2
    assert rec.warnings == 0


def test_probe_points_are_seeded():
    a, b = V.probe_points(2, seed=3), V.probe_points(2, seed=3)
    assert np.array_equal(a, b)
    assert np.all(np.linalg.norm(a, axis=1) <= 0.5)


def test_harnack_control_constant_target():
    for rec in V.harnack_probe(KernelSpec(1, -0.5), (0.1, 0.01), target="1"):
        assert rec.met
        assert rec.sup_value >= rec.inf_value > 0
        assert rec.ratio - 1 <= 2 * rec.epsilon_target / (1 - rec.epsilon_target)


def test_harnack_sweep_baseline():
    recs = V.harnack_probe(KernelSpec(1, -0.5), (1e-1, 3e-2, 1e-2))
    assert V.harnack_ratios_increasing(recs)
    ratios = [r.ratio for r in recs]
    # regression baseline from the verified sweep
    assert ratios == pytest.approx([3.256885, 8.026044, 29.28695], rel=1e-5)
    assert ratios[-1] >= 10


def test_harnack_record_infinite_ratio_and_monotonicity_filter():
    recs = [V.HarnackRecord(0.1, 1.0, -0.1, math.inf, 0.1, True, 4, 1.0),
            V.HarnackRecord(0.05, 1.0, 0.2, 5.0, 0.05, True, 4, 1.0),
            V.HarnackRecord(0.02, math.nan, math.nan, math.nan, 0.5, False, 0, math.nan),
            V.HarnackRecord(0.01, 1.0, 0.1, 10.0, 0.01, True, 4, 1.0)]
    assert V.harnack_ratios_increasing(recs)
    with pytest.raises(ValueError):
        V.harnack_probe(KernelSpec(1, -0.5), (0.01, 0.1))


def test_growth_probe_examples():
    assert V.kernel_ck_norm(1, 0, [3.5], 0) == 1.0
    assert V.kernel_ck_norm(1, -40, [3.5], 0) <= 1e-10
    probe = V.lemma_growth_probe(1, [3.5], 2, range(-40, 1), 2)
    assert probe.N == 1.0
    lo, hi = V.growth_tail_band(probe)
    assert hi / lo <= 1e4
    assert np.all(np.diff(probe.norms) > 0)


def test_growth_probe_errors():
    with pytest.raises(ValueError):
        V.lemma_growth_probe(1, [3.5], 2, range(-4, 1), 1)
    with pytest.raises(ValueError):
        V.lemma_growth_probe(1, [2.5], 0, range(-4, 1), 1)
    with pytest.raises(V.GrowthProbeError) as info:
        V.lemma_growth_probe(1, [3.5], 0, [6], 1, max_power=0)
    assert info.value.worst_ratio > 1


def test_report_schema():
    rep = V.VerificationReport()
    rep.add("a", 1e-9, 1e-8)
    rep.add("b", math.inf, 1.0)
    data = json.loads(rep.to_json())
    assert data["schema_version"] == V.REPORT_SCHEMA_VERSION
    assert [list(c) for c in data["checks"]] == [["name", "measured", "tolerance", "pass"]] * 2
    assert data["checks"][1]["measured"] == "inf" and data["checks"][1]["pass"] is False
    assert not rep.passed


def test_identity_battery_passes():
    report = V.run_identity_checks(1)
    assert report.passed, [c for c in report.checks if not c.passed]
