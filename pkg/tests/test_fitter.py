import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszfit.expressions import TargetSpec
from rieszfit.fitter import (DegenerateMatrixError, FitFailureError, discrepancy_solution, extend_target, fit,
                             fit_schedule, residual_ck, residual_curve, solve_least_squares)
from rieszfit.kernel import KernelSpec
from rieszfit.sources import SourceDensity, build_grid, default_layout, design_matrix, potential_on_grid

SPEC = KernelSpec(1, -0.5)


class PlantedTarget(TargetSpec):
    """Target given by the potential of a planted density (only ``table`` is used by the fitter)."""

    def __init__(self, density):
        object.__setattr__(self, "expression", "0")
        object.__setattr__(self, "d", density.spec.d)
        object.__setattr__(self, "tree", 0)
        object.__setattr__(self, "planted", density)

    def table(self, grid):
        return potential_on_grid(self.planted.spec, self.planted, grid)


def test_extend_target_regions():
    ext = extend_target(TargetSpec("exp(y1) + y1^3", 1))
    core = np.array([[0.5], [-1.0], [1.4]])
    assert np.array_equal(ext(core), TargetSpec("exp(y1) + y1^3", 1).evaluate(core))
    assert np.all(ext(np.array([[2.5], [-2.0], [7.0]])) == 0.0)
    assert np.all(extend_target(TargetSpec("0", 1))(np.linspace(-3, 3, 11)[:, None]) == 0.0)
    band = ext(np.array([[1.75]]))[0]
    assert 0 < band < TargetSpec("exp(y1) + y1^3", 1).evaluate([[1.75]])[0]
    with pytest.raises(ValueError):
        extend_target(TargetSpec("1", 1), 1.5)


def test_extension_is_smooth_across_the_band():
    ext = extend_target(TargetSpec("1", 1))
    ys = np.linspace(1.4, 2.1, 2001)[:, None]
    d1 = ext.evaluate(ys, (1,))
    fd = np.gradient(ext(ys), ys[:, 0])
    assert np.allclose(d1[5:-5], fd[5:-5], atol=1e-4)


def test_lstsq_identity():
    b = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(solve_least_squares(np.eye(3), b).coefficients, b)


def test_lstsq_rank_deficient_min_norm():
    col = np.array([1.0, 2.0, -1.0, 0.5])
    A = np.column_stack([col, 2 * col])
    b = 3 * col
    sol = solve_least_squares(A, b)
    assert sol.rank_used == 1
    assert np.linalg.norm(A @ sol.coefficients - b) <= 1e-10
    assert np.allclose(sol.coefficients, [0.6, 1.2])


def test_lstsq_recovers_well_conditioned(rng):
    A = rng.normal(size=(50, 20))
    c = rng.normal(size=20)
    x = solve_least_squares(A, A @ c).coefficients
    assert np.linalg.norm(x - c) / np.linalg.norm(c) <= 1e-8


def test_lstsq_degenerate():
    with pytest.raises(DegenerateMatrixError):
        solve_least_squares(np.zeros((3, 2)), np.ones(3))
    with pytest.raises(ValueError):
        solve_least_squares(np.eye(2), np.ones(2), cutoff_ratio=0.0)


def test_lstsq_is_deterministic(rng):
    A = rng.normal(size=(30, 12))
    b = rng.normal(size=30)
    assert np.array_equal(solve_least_squares(A, b).coefficients, solve_least_squares(A, b).coefficients)


def test_zero_target():
    res = fit(SPEC, TargetSpec("0", 1), 0, 1e-6)
    assert res.met and res.residual_ck == 0.0
    assert np.all(res.density.coefficients == 0.0)


def test_plant_and_recover():
    atoms = tuple(default_layout(1, 8))
    planted = SourceDensity(SPEC, atoms, np.linspace(-1, 1, 8))
    target = PlantedTarget(planted)
    grid = build_grid(1, 1)
    results = fit_schedule(SPEC, target, 1, None, (8, 16), grid)
    want = target.table(grid)
    for r in results:
        got = potential_on_grid(SPEC, r.density, grid)
        assert np.max(np.abs(got - want)) <= 1e-8 * np.max(np.abs(want))
        assert r.residual_ck <= 1e-8


def test_residual_monotone_and_round_trip():
    grid = build_grid(1, 0)
    target = TargetSpec("y1^2", 1)
    results = fit_schedule(SPEC, target, 0, None, (8, 16, 32, 64), grid)
    res = [r.residual_ck for r in results]
    assert all(b <= a + 1e-10 for a, b in zip(res, res[1:]))
    assert res[-1] <= 1e-2
    for r in results:
        assert r.rank_used <= r.atoms_used
        assert residual_ck(r.density, target, grid) == pytest.approx(r.residual_ck, rel=1e-10, abs=1e-14)
    rows = residual_curve(results)
    assert [row[0] for row in rows] == [8, 24, 56, 120]
    norms = [row[2] for row in rows]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(norms, norms[1:]))


def test_residual_curve_needs_two_steps():
    results = fit_schedule(SPEC, TargetSpec("y1", 1), 0, None, (8,))
    with pytest.raises(ValueError):
        residual_curve(results)


def test_identical_layouts_identical_residuals():
    a = fit_schedule(SPEC, TargetSpec("y1^2", 1), 0, None, (8, 16))
    b = fit_schedule(SPEC, TargetSpec("y1^2", 1), 0, None, (8, 16))
    assert [r.residual_ck for r in a] == [r.residual_ck for r in b]


@settings(max_examples=6, deadline=None)
@given(st.floats(0.01, 100).map(lambda v: v * (1 if int(v * 1000) % 2 else -1)))
def test_scaling_equivariance(a):
    # exact when the scale is a power of two
    twice = fit_schedule(SPEC, TargetSpec("2*cos(y1)", 1), 0, None, (8, 16))
    once = fit_schedule(SPEC, TargetSpec("cos(y1)", 1), 0, None, (8, 16))
    assert [t.residual_ck for t in twice] == [2 * o.residual_ck for o in once]
    grid = build_grid(1, 0)
    base = fit_schedule(SPEC, TargetSpec("cos(y1)", 1), 0, None, (8, 16), grid)
    scaled = fit_schedule(SPEC, TargetSpec(f"({a!r})*cos(y1)", 1), 0, None, (8, 16), grid)
    for b, s in zip(base, scaled):
        # residual = f - A c is a cancellation between terms of size |A| |c|;
        # below that floor equivariance cannot be resolved in double precision
        A = design_matrix(SPEC, b.density.atoms, grid)
        floor = 64 * np.finfo(float).eps * abs(a) * float(np.max(np.abs(A) @ np.abs(b.density.coefficients)))
        assert abs(s.residual_ck - abs(a) * b.residual_ck) <= max(1e-8 * abs(a) * b.residual_ck, floor)


def test_epsilon_stops_at_first_met_step():
    results = fit_schedule(SPEC, TargetSpec("y1^2", 1), 0, 1e-2, (8, 16, 32, 64))
    assert len(results) == 1 and results[0].met
    assert results[0].residual_ck <= 1e-2


def test_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        fit(SPEC, TargetSpec("y1", 1), 0, 0.0)


def test_fit_failure_when_every_step_degenerate(monkeypatch):
    import rieszfit.fitter as fitter_module
    monkeypatch.setattr(fitter_module, "design_matrix", lambda spec, atoms, grid: np.zeros((17, len(atoms))))
    with pytest.raises(FitFailureError) as info:
        fit(SPEC, TargetSpec("y1", 1), 0, 1e-3, (8, 16))
    assert math.isinf(info.value.best_residual)


def test_discrepancy_meets_epsilon(rng):
    A = rng.normal(size=(40, 10)) @ np.diag(10.0 ** -np.arange(10))
    b = A @ rng.normal(size=10) + 1e-6 * rng.normal(size=40)
    resid = lambda x: float(np.max(np.abs(A @ x - b)))
    x, lam, rank = discrepancy_solution(A, b, resid, 1e-2)
    assert resid(x) <= 1e-2
    assert lam > 0
    assert discrepancy_solution(A, b, resid, 1e-30) is None


def test_fit_result_json_field_order():
    res = fit(SPEC, TargetSpec("y1^2", 1), 0, 1e-2)
    data = json.loads(res.to_json())
    assert list(data)[:5] == ["atoms_used", "layout_size", "residual_ck", "coefficient_norm", "rank_used"]
    assert list(data["density"]) == ["d", "n", "atoms", "coefficients"]
    zero = json.loads(fit(SPEC, TargetSpec("0", 1), 0, 1e-3).to_json())
    assert zero["regularization"] == "inf"
