"""Fit source densities so that ``K_n g`` matches a target in the grid C^k norm.

The fit is a truncated-SVD least-squares solve over a growing, nested atom
basis; tolerance-targeted fits are then damped (Tikhonov filter factors on
the kept singular values) back to the smoothest solution meeting the
tolerance. Each schedule step keeps the previous step's columns as a sub-block,
so the previous solution (padded with zeros) stays admissible and the
reported residual never increases along the schedule.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import sympy

from .expressions import TargetSpec
from .kernel import KernelSpec
from .report import jsonable
from .sources import (EvalGrid, SourceDensity, build_grid, ck_grid_norm, design_matrix, nested_layouts,
                      potential_on_grid, table_from_vector)

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF_RATIO = 1e-12
DEFAULT_TRANSITION_WIDTH = 0.5
DEFAULT_SCHEDULE = (8, 16, 32, 64)


class DegenerateMatrixError(ValueError):
    pass


class FitFailureError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual


# ---------------------------------------------------------------------------
# extension by a smooth radial cutoff


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    a, b = _psi(t), _psi(1.0 - np.asarray(t, dtype=float))
    return a / (a + b)


@dataclass(frozen=True)
class ExtendedTarget:
    """``f * chi`` with ``chi = 1`` on ``|y| <= 2 - width`` and ``chi = 0`` on ``|y| >= 2``."""

    base: TargetSpec
    width: float = DEFAULT_TRANSITION_WIDTH
    _tree: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.width <= 1:
            raise ValueError("transition width must lie in (0, 1]")
        syms = self.base.symbols
        r = sympy.sqrt(sum(s**2 for s in syms))
        tau = (2 - r) / sympy.nsimplify(self.width)
        psi_a = sympy.exp(-1 / tau)
        psi_b = sympy.exp(-1 / (1 - tau))
        chi = psi_a / (psi_a + psi_b)
        object.__setattr__(self, "_tree", self.base.tree * chi)

    @property
    def d(self) -> int:
        return self.base.d

    def cutoff(self, points):
        r = np.linalg.norm(np.atleast_2d(points), axis=1)
        return smooth_step((2.0 - r) / self.width)

    def evaluate(self, points, orders=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        orders = tuple(orders) if orders is not None else (0,) * self.d
        r = np.linalg.norm(pts, axis=1)
        out = np.zeros(len(pts))
        core = r <= 2.0 - self.width
        band = (~core) & (r < 2.0)
        if np.any(core):
            out[core] = self.base.evaluate(pts[core], orders)
        if np.any(band):
            fn = _lambdify_cached(self._tree, self.base.symbols, orders)
            with np.errstate(all="ignore"):
                out[band] = np.broadcast_to(fn(*pts[band].T), (int(band.sum()),))
        return out

    def __call__(self, points):
        return self.evaluate(points)


_LAMBDA_CACHE: dict = {}


def _lambdify_cached(tree, symbols, orders):
    key = (tree, symbols, orders)
    if key not in _LAMBDA_CACHE:
        expr = tree
        for s, k in zip(symbols, orders):
            if k:
                expr = sympy.diff(expr, s, k)
        _LAMBDA_CACHE[key] = sympy.lambdify(symbols, expr, "numpy")
    return _LAMBDA_CACHE[key]


def extend_target(target: TargetSpec, transition_width: float = DEFAULT_TRANSITION_WIDTH) -> ExtendedTarget:
    return ExtendedTarget(target, transition_width)


# ---------------------------------------------------------------------------
# least squares


@dataclass(frozen=True)
class LstsqSolution:
    coefficients: np.ndarray
    rank_used: int
    cutoff: float


def solve_least_squares(A, b, cutoff_ratio: float = DEFAULT_CUTOFF_RATIO) -> LstsqSolution:
    """Minimum-norm least squares, discarding singular values below
    ``cutoff_ratio * s_max``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.size == 0:
        raise ValueError("empty matrix")
    if not 0 < cutoff_ratio < 1:
        raise ValueError("cutoff_ratio must lie in (0, 1)")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = cutoff_ratio * (s[0] if s.size else 0.0)
    keep = s > cutoff
    if not np.any(keep):
        raise DegenerateMatrixError("all singular values are below the cutoff")
    x = Vt[keep].T @ ((U[:, keep].T @ b) / s[keep])
    return LstsqSolution(x, int(keep.sum()), float(cutoff))


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class FitResult:
    density: SourceDensity
    residual_ck: float
    coefficient_norm: float
    rank_used: int
    singular_value_cutoff: float
    atoms_used: int
    met: bool
    epsilon: float
    k: int
    layout_size: int
    reused_previous: bool = False
    regularization: float = 0.0

    def to_dict(self) -> dict:
        return {
            "atoms_used": self.atoms_used,
            "layout_size": self.layout_size,
            "residual_ck": self.residual_ck,
            "coefficient_norm": self.coefficient_norm,
            "rank_used": self.rank_used,
            "singular_value_cutoff": self.singular_value_cutoff,
            "epsilon": self.epsilon,
            "k": self.k,
            "met": self.met,
            "reused_previous": self.reused_previous,
            "regularization": self.regularization,
            "density": self.density.to_dict(),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(jsonable(self.to_dict()), indent=indent)


def residual_table(density: SourceDensity, target: TargetSpec, grid: EvalGrid) -> np.ndarray:
    return target.table(grid) - potential_on_grid(density.spec, density, grid)


def residual_ck(density: SourceDensity, target: TargetSpec, grid: EvalGrid) -> float:
    """Grid C^k misfit of ``K_n g`` against the target, recomputed from scratch."""
    return ck_grid_norm(residual_table(density, target, grid), grid)


def _ck_of(rhs_table, A, coef, grid):
    return ck_grid_norm(rhs_table - table_from_vector(A @ coef, grid), grid)


def discrepancy_solution(A, b, residual_fn, epsilon: float, cutoff_ratio: float = DEFAULT_CUTOFF_RATIO,
                         iterations: int = 80):
    """Smoothest Tikhonov-filtered truncated-SVD solution meeting ``residual_fn(x) <= epsilon``.

    Bisects ``log10(lambda)`` for the largest damping that still meets the
    tolerance (discrepancy principle). Returns ``(x, lam, rank)`` or ``None``
    when even the undamped solution misses ``epsilon``.
    """
    U, s, Vt = np.linalg.svd(np.asarray(A, dtype=float), full_matrices=False)
    keep = s > cutoff_ratio * s[0]
    if not np.any(keep):
        raise DegenerateMatrixError("all singular values are below the cutoff")
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    beta = U.T @ b

    def solve(lam):
        return Vt.T @ (s / (s * s + lam * lam) * beta)

    if residual_fn(np.zeros(A.shape[1])) <= epsilon:
        return np.zeros(A.shape[1]), math.inf, int(keep.sum())
    if residual_fn(solve(0.0)) > epsilon:
        return None
    lo, hi = math.log10(s[-1]) - 8, math.log10(s[0]) + 4
    if residual_fn(solve(10.0**lo)) > epsilon:
        lo = -math.inf
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if residual_fn(solve(10.0**mid)) <= epsilon:
                lo = mid
            else:
                hi = mid
    lam = 0.0 if lo == -math.inf else 10.0**lo
    return solve(lam), lam, int(keep.sum())


def fit_schedule(spec: KernelSpec, target: TargetSpec, k: int, epsilon: float | None = None,
                 schedule: Sequence[int] = DEFAULT_SCHEDULE, grid: EvalGrid | None = None,
                 cutoff_ratio: float = DEFAULT_CUTOFF_RATIO, discrepancy: bool = True) -> list[FitResult]:
    """One :class:`FitResult` per completed schedule step.

    With ``epsilon=None`` every step runs and each step is the undamped
    truncated-SVD solution. With ``epsilon`` given the loop stops at the
    first step that can reach it; with ``discrepancy`` that step is damped
    back to the smoothest solution whose residual is still ``<= epsilon``.
    """
    if epsilon is not None and epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not schedule:
        raise ValueError("empty schedule")
    if target.d != spec.d:
        raise ValueError("target dimension does not match kernel dimension")
    spec = spec if spec.k_max >= k else KernelSpec(spec.d, spec.n, k)
    grid = grid if grid is not None else build_grid(spec.d, k)
    if grid.k != k:
        raise ValueError(f"grid carries order {grid.k}, fit asked for k={k}")
    rhs_table = target.table(grid)
    rhs = rhs_table.ravel()

    results: list[FitResult] = []
    A = np.zeros((rhs.size, 0))
    best_residual = math.inf
    for count, atoms in zip(schedule, nested_layouts(spec.d, schedule)):
        new = atoms[A.shape[1]:]
        A = np.column_stack([A, design_matrix(spec, new, grid)])
        try:
            sol = solve_least_squares(A, rhs, cutoff_ratio)
        except DegenerateMatrixError:
            logger.warning("degenerate design matrix at %d atoms", len(atoms))
            continue
        coef, lam, rank = sol.coefficients, 0.0, sol.rank_used
        res = _ck_of(rhs_table, A, coef, grid)
        reused = False
        if results and res > results[-1].residual_ck:
            prev = results[-1].density.coefficients
            coef = np.concatenate([prev, np.zeros(len(atoms) - len(prev))])
            lam, reused = results[-1].regularization, True
            res = _ck_of(rhs_table, A, coef, grid)
        met = epsilon is not None and res <= epsilon
        if met and discrepancy:
            damped = discrepancy_solution(A, rhs, lambda x: _ck_of(rhs_table, A, x, grid), epsilon,
                                          cutoff_ratio)
            if damped is not None:
                coef, lam, rank = damped
                res, reused = _ck_of(rhs_table, A, coef, grid), False
        density = SourceDensity(spec, tuple(atoms), coef)
        result = FitResult(density, res, float(np.linalg.norm(coef)), rank, sol.cutoff,
                           len(atoms), met, math.nan if epsilon is None else float(epsilon), k,
                           count, reused, lam)
        logger.info("atoms=%d rank=%d lambda=%.3g residual=%.3e |c|=%.3e%s", len(atoms), rank, lam,
                    res, result.coefficient_norm, " (kept previous)" if reused else "")
        results.append(result)
        best_residual = min(best_residual, res)
        if met:
            break
    if not results:
        raise FitFailureError("design matrix degenerate at every schedule step", best_residual)
    return results


def fit(spec: KernelSpec, target: TargetSpec, k: int, epsilon: float,
        schedule: Sequence[int] = DEFAULT_SCHEDULE, grid: EvalGrid | None = None,
        cutoff_ratio: float = DEFAULT_CUTOFF_RATIO, discrepancy: bool = True) -> FitResult:
    """Escalate the atom basis until the grid C^k residual is at most ``epsilon``.

    Returns the last completed step; ``result.met`` says whether ``epsilon``
    was reached.
    """
    return fit_schedule(spec, target, k, epsilon, schedule, grid, cutoff_ratio, discrepancy)[-1]


def residual_curve(results: Sequence[FitResult]) -> list[tuple[int, float, float, int]]:
    """Rows ``(atoms_used, residual_ck, coefficient_norm, rank_used)`` sorted by atoms."""
    if len(results) < 2:
        raise ValueError("need at least two schedule steps")
    rows = sorted((r.atoms_used, r.residual_ck, r.coefficient_norm, r.rank_used) for r in results)
    return rows
