"""Independent checks on fitted potentials and on the identities behind them.

The fractional Laplacian uses the symmetrized singular integral

    (-Lap)^s u(y) = -C(d,s)/2 * int (u(y+z) + u(y-z) - 2u(y)) |z|^{-d-2s} dz

with ``C(d,s) = 4^s Gamma(d/2+s) / (pi^{d/2} |Gamma(-s)|)``. In polar form
``z = rho * omega`` the radial integral is split into

* ``rho < delta``: second-order Taylor term integrated analytically, plus a
  Gauss quadrature of the (fourth-order small) remainder;
* ``delta < rho < R``: composite Gauss panels, refined where ``y +- z``
  crosses the source annulus;
* ``rho > R``: the substitution ``rho = R / tau`` turns the tail into a
  Gauss-Jacobi integral over ``(0, 1)``. For potentials the known
  ``|x|^{2s-d}`` decay is absorbed into the weight, which keeps the
  integrand smooth at ``tau = 0``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import calculus
from .calculus import composite_gauss, gauss_jacobi, sphere_area, sphere_directions
from .expressions import TargetSpec
from .fitter import DEFAULT_CUTOFF_RATIO, FitFailureError, fit
from .kernel import (KernelSpec, MultiIndex, derive_expansion, is_admissible_exponent,
                     iterated_laplacian_coefficient, laplacian_coefficient)
from .sources import (ANNULUS_INNER, ANNULUS_OUTER, BumpAtom, EvalGrid, SourceDensity, build_grid,
                      ck_grid_norm, hessian_anywhere, potential_anywhere, potential_on_grid)

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


class PreconditionError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


class GrowthProbeError(RuntimeError):
    def __init__(self, message: str, worst_ratio: float):
        super().__init__(message)
        self.worst_ratio = worst_ratio


# ---------------------------------------------------------------------------
# fields the operator can be applied to


class Field:
    """A scalar field on ``R^d`` with values and Hessians at point arrays."""

    d: int
    feature_band: tuple[float, float] | None = None
    feature_scale: float = math.inf
    # exponent p with u(x) ~ |x|^p at infinity, when the field is known to decay that way
    decay: float | None = None

    def values(self, points) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, points) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self, y) -> list[float]:
        return []


class PotentialField(Field):
    """``K_n g`` for a source density, evaluated anywhere."""

    def __init__(self, density: SourceDensity, resolution: int | None = None,
                 singular_resolution: int = 48):
        self.density = density
        self.d = density.spec.d
        self.resolution = resolution
        self.singular_resolution = singular_resolution
        self.feature_band = (ANNULUS_INNER, ANNULUS_OUTER)
        self.decay = density.spec.n
        live = [a.radius for a, c in zip(density.atoms, density.coefficients) if c != 0.0]
        self.feature_scale = min(live) if live else math.inf

    def values(self, points):
        return potential_anywhere(self.density.spec, self.density, points, self.resolution,
                                  self.singular_resolution)

    def hessian(self, points):
        return hessian_anywhere(self.density.spec, self.density, points, self.resolution,
                                self.singular_resolution)


class FunctionField(Field):
    """Field from vectorized callables; ``kinks`` lists radii ``|x|`` where it is not smooth."""

    def __init__(self, d: int, func: Callable, hess: Callable, kinks: Sequence[float] = ()):
        self.d = d
        self.func = func
        self.hess = hess
        self.kinks = tuple(kinks)

    def values(self, points):
        return np.asarray(self.func(np.atleast_2d(points)), dtype=float)

    def hessian(self, points):
        return np.asarray(self.hess(np.atleast_2d(points)), dtype=float)

    def breakpoints(self, y):
        if self.d != 1:
            return []
        y0 = float(np.asarray(y).ravel()[0])
        return sorted({abs(s * r - y0) for r in self.kinks for s in (1.0, -1.0)})


class CombinedField(Field):
    """``sum_i a_i u_i``."""

    def __init__(self, terms: Sequence[tuple[float, Field]]):
        self.terms = list(terms)
        self.d = self.terms[0][1].d
        bands = [u.feature_band for _, u in self.terms if u.feature_band]
        self.feature_band = (min(b[0] for b in bands), max(b[1] for b in bands)) if bands else None
        self.feature_scale = min(u.feature_scale for _, u in self.terms)
        decays = {u.decay for _, u in self.terms}
        self.decay = decays.pop() if len(decays) == 1 else None

    def values(self, points):
        return sum(a * u.values(points) for a, u in self.terms)

    def hessian(self, points):
        return sum(a * u.hessian(points) for a, u in self.terms)

    def breakpoints(self, y):
        return sorted({b for _, u in self.terms for b in u.breakpoints(y)})


def constant_field(d: int, value: float) -> FunctionField:
    return FunctionField(d, lambda x: np.full(len(x), float(value)),
                         lambda x: np.zeros((len(x), d, d)))


# ---------------------------------------------------------------------------
# fractional Laplacian


@dataclass(frozen=True)
class FracLapSpec:
    s: float
    d: int = 1
    delta: float = 0.1
    R: float = 50.0
    order: int = 16
    tail_order: int = 40
    coarse_width: float = 0.1
    band_width: float = 0.02
    angular: int = 32

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if not self.delta < 1 < self.R:
            raise ValueError("need delta < 1 < R")

    @property
    def n(self) -> float:
        return 2 * self.s - self.d

    @property
    def margin(self) -> float:
        return self.delta

    @property
    def constant(self) -> float:
        """``C(d, s)`` of the singular-integral definition."""
        s, d = self.s, self.d
        return 4**s * math.gamma(d / 2 + s) / (math.pi ** (d / 2) * abs(math.gamma(-s)))


@dataclass(frozen=True)
class FracLapResult:
    value: float
    near: float
    mid: float
    far: float
    far_error: float
    accuracy_warning: bool

    def __float__(self):
        return self.value


@lru_cache(maxsize=None)
def _half_directions(d: int, angular: int):
    dirs, w = sphere_directions(d, angular)
    keep = []
    for v in dirs:
        nz = v[np.abs(v) > 1e-12]
        keep.append(nz.size > 0 and nz[0] > 0)
    keep = np.array(keep)
    return dirs[keep], 2 * w[keep]


def _mid_edges(y_norm: float, spec: FracLapSpec, u: Field, extra: Sequence[float]):
    band = None
    width = spec.band_width
    if u.feature_band is not None:
        lo, hi = u.feature_band
        band = (max(spec.delta, lo - y_norm - 0.25), hi + y_norm + 0.25)
        width = min(width, u.feature_scale / 2)
    edges = [spec.delta]
    rho = spec.delta
    while rho < spec.R - 1e-12:
        if band and band[0] <= rho < band[1]:
            w = width
            nxt = min(rho + w, band[1])
        else:
            w = max(spec.coarse_width, 0.2 * rho)
            if band and rho < band[0]:
                w = min(w, max(width, 0.3 * (band[0] - rho)))
                nxt = min(rho + w, band[0])
            else:
                nxt = rho + w
        rho = min(nxt, spec.R)
        edges.append(rho)
    pts = [b for b in extra if spec.delta < b < spec.R]
    return np.unique(np.concatenate([edges, pts]))


def _second_difference(u: Field, y, dirs, rho):
    """``u(y + rho w) + u(y - rho w) - 2 u(y)`` on a ``(len(dirs), len(rho))`` grid."""
    z = rho[None, :, None] * dirs[:, None, :]
    pts = np.concatenate([(y + z).reshape(-1, u.d), (y - z).reshape(-1, u.d)])
    vals = u.values(pts)
    half = vals.size // 2
    return (vals[:half] + vals[half:]).reshape(len(dirs), len(rho))


def fractional_laplacian(u: Field, y, spec: FracLapSpec, check_domain: bool = True) -> FracLapResult:
    """``(-Lap)^s u(y)``; see the module docstring for the splitting."""
    y = np.asarray(y, dtype=float).reshape(spec.d)
    if u.d != spec.d:
        raise ValueError("field dimension does not match FracLapSpec")
    if isinstance(u, PotentialField):
        if abs(u.density.spec.n - spec.n) > 1e-12:
            raise ValueError(f"potential exponent {u.density.spec.n} != 2s - d = {spec.n}")
        if check_domain and np.linalg.norm(y) > 1 - spec.margin:
            raise PreconditionError(f"|y| = {np.linalg.norm(y):.4g} exceeds 1 - margin = {1 - spec.margin}")
    s, d = spec.s, spec.d
    dirs, wdir = _half_directions(d, spec.angular)
    u0 = float(u.values(y[None, :])[0])
    H = u.hessian(y[None, :])[0]

    # near field
    near_edges = spec.delta * np.array([0.0, 0.0625, 0.125, 0.25, 0.5, 1.0])
    rho, wr = composite_gauss(near_edges, spec.order)
    F = _second_difference(u, y, dirs, rho) - 2 * u0
    quad_form = np.einsum("ki,ij,kj->k", dirs, H, dirs)[:, None] * rho[None, :] ** 2
    near_num = float(wdir @ ((F - quad_form) * rho ** (-1 - 2 * s)) @ wr)
    near_exact = np.trace(H) / d * sphere_area(d) * spec.delta ** (2 - 2 * s) / (2 - 2 * s)
    near = near_num + near_exact

    # middle
    edges = _mid_edges(float(np.linalg.norm(y)), spec, u, u.breakpoints(y))
    rho, wr = composite_gauss(edges, spec.order)
    F = _second_difference(u, y, dirs, rho) - 2 * u0
    mid = float(wdir @ (F * rho ** (-1 - 2 * s)) @ wr)

    # tail via rho = R / tau. For a field decaying like |x|^p the factor tau^{-p}
    # is absorbed into the Jacobi weight and -2u(y) is integrated exactly.
    def tail(order):
        if u.decay is None:
            t, w = gauss_jacobi(order, 0.0, 2 * s - 1)
            tau = (1 + t) / 2
            Ft = _second_difference(u, y, dirs, spec.R / tau) - 2 * u0
            return float(wdir @ Ft @ w) * spec.R ** (-2 * s) * 2 ** (-2 * s)
        p = u.decay
        t, w = gauss_jacobi(order, 0.0, 2 * s - 1 - p)
        tau = (1 + t) / 2
        Ft = _second_difference(u, y, dirs, spec.R / tau) * tau**p
        const = -2 * u0 * float(wdir.sum()) * spec.R ** (-2 * s) / (2 * s)
        return const + float(wdir @ Ft @ w) * spec.R ** (-2 * s) * 2 ** (p - 2 * s)

    far = tail(spec.tail_order)
    far_error = abs(far - tail(spec.tail_order // 2))
    total = near + mid + far
    value = -0.5 * spec.constant * total
    scale = 0.5 * spec.constant * (abs(near) + abs(mid) + abs(far))
    warning = far_error * 0.5 * spec.constant > 0.1 * max(abs(value), 1e-12 * scale)
    return FracLapResult(value, near, mid, far, far_error, bool(warning))


def riesz_constant_reference(d: int, s: float) -> float:
    """Textbook constant with ``(-Lap)^{-s} f = c * |x|^{2s-d} * f`` (valid for ``2s < d``)."""
    return math.gamma(d / 2 - s) / (4**s * math.pi ** (d / 2) * math.gamma(s))


@dataclass(frozen=True)
class Calibration:
    constant: float
    cross_check: float
    relative_gap: float


@lru_cache(maxsize=None)
def _calibrate(d: int, s: float, amplitude: float, frac_spec: FracLapSpec, tolerance: float):
    n = 2 * s - d
    if n == 0:
        raise CalibrationError("K_0 is constant, so its potentials are annihilated; no finite constant")
    spec = KernelSpec(d, n, 2)
    center = (3.5,) + (0.0,) * (d - 1)
    atom = BumpAtom(center, 0.4)
    u = PotentialField(SourceDensity(spec, (atom,), [amplitude]))
    probes = [np.array(center), np.array(center) + np.r_[0.1, np.zeros(d - 1)]]
    ratios = []
    for p in probes:
        val = fractional_laplacian(u, p, frac_spec, check_domain=False).value
        g = amplitude * float(atom(p[None, :])[0])
        if abs(val) <= 1e-12 * abs(g):
            raise CalibrationError(f"operator annihilates K_{n:g} * bump (n = 2s - d = {n:g}); no finite constant")
        ratios.append(g / val)
    gap = abs(ratios[0] - ratios[1]) / abs(ratios[0])
    if gap > tolerance:
        raise CalibrationError(f"calibration points disagree: {ratios[0]:.6g} vs {ratios[1]:.6g}")
    return Calibration(ratios[0], ratios[1], gap)


def riesz_normalization(d: int, s: float, amplitude: float = 1.0, frac_spec: FracLapSpec | None = None,
                        tolerance: float = 1e-2) -> Calibration:
    """Calibrate ``c`` so that ``(-Lap)^s (c K_{2s-d} * b) = b`` for a test bump ``b``.

    The ratio is measured at the bump center and cross-checked at a second
    interior point.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return _calibrate(d, float(s), float(amplitude), frac_spec or FracLapSpec(s, d), tolerance)


# ---------------------------------------------------------------------------
# harmonicity of fitted potentials


@dataclass(frozen=True)
class HarmonicityRecord:
    probe_points: np.ndarray
    probe_values: np.ndarray
    annulus_point: np.ndarray
    annulus_value: float
    relative: float
    warnings: int


def probe_points(d: int, count: int = 5, radius: float = 0.5, seed: int = 0) -> np.ndarray:
    """``count`` points of the closed ball of the given radius; in ``d = 1`` equispaced."""
    if d == 1:
        return np.linspace(-radius, radius, count)[:, None]
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        p = rng.uniform(-radius, radius, d)
        if np.linalg.norm(p) <= radius:
            pts.append(p)
    return np.array(pts)


def annulus_probe(density: SourceDensity) -> np.ndarray:
    """Center of the atom carrying the largest coefficient magnitude."""
    j = int(np.argmax(np.abs(density.coefficients)))
    return np.array(density.atoms[j].center)


def harmonicity_check(density: SourceDensity, s: float, frac_spec: FracLapSpec | None = None,
                      points: np.ndarray | None = None, seed: int = 0) -> HarmonicityRecord:
    """``max |(-Lap)^s K_n g|`` over probe points in the half ball, relative to the
    operator's magnitude at an annulus point inside the support of ``g``."""
    frac_spec = frac_spec or FracLapSpec(s, density.spec.d)
    u = PotentialField(density)
    points = probe_points(density.spec.d, seed=seed) if points is None else np.atleast_2d(points)
    results = [fractional_laplacian(u, p, frac_spec) for p in points]
    xa = annulus_probe(density)
    ref = fractional_laplacian(u, xa, frac_spec, check_domain=False)
    vals = np.array([r.value for r in results])
    rel = float(np.max(np.abs(vals)) / abs(ref.value))
    warnings = sum(r.accuracy_warning for r in results)
    return HarmonicityRecord(points, vals, xa, ref.value, rel, warnings)


# ---------------------------------------------------------------------------
# Harnack probe


@dataclass(frozen=True)
class HarnackRecord:
    epsilon_target: float
    sup_value: float
    inf_value: float
    ratio: float
    residual: float
    met: bool
    atoms_used: int
    coefficient_norm: float


HARNACK_TARGET = "|y|^2 + 1e-3"
HARNACK_SCHEDULE = (2, 4, 6, 8, 12, 16, 24, 32)


def harnack_probe(spec: KernelSpec, epsilons: Sequence[float], k: int = 0, target: str = HARNACK_TARGET,
                  schedule: Sequence[int] = HARNACK_SCHEDULE, sample_spacing: float | None = None,
                  cutoff_ratio: float = DEFAULT_CUTOFF_RATIO) -> list[HarnackRecord]:
    """Fit the target at each tolerance and record ``sup / inf`` of ``K_n g`` on the half ball."""
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    tspec = TargetSpec(target, spec.d)
    spacing = sample_spacing or (1 / 200 if spec.d == 1 else 1 / 32)
    sample = build_grid(spec.d, 0, spacing, radius=0.5)
    out = []
    for eps in epsilons:
        try:
            result = fit(spec, tspec, k, eps, schedule, cutoff_ratio=cutoff_ratio)
        except FitFailureError as exc:
            out.append(HarnackRecord(eps, math.nan, math.nan, math.nan, exc.best_residual, False, 0, math.nan))
            continue
        vals = potential_on_grid(result.density.spec, result.density, sample)[0]
        sup, inf = float(vals.max()), float(vals.min())
        ratio = sup / inf if inf > 0 else math.inf
        out.append(HarnackRecord(eps, sup, inf, ratio, result.residual_ck, result.met, result.atoms_used,
                                 result.coefficient_norm))
        logger.info("harnack eps=%.3g residual=%.3e sup=%.4g inf=%.4g ratio=%.4g", eps,
                    result.residual_ck, sup, inf, ratio)
    return out


def harnack_ratios_increasing(records: Sequence[HarnackRecord], strict: bool = True) -> bool:
    """Monotonicity over met records once ``inf > 0``."""
    ratios = [r.ratio for r in records if r.met]
    while ratios and not math.isfinite(ratios[0]):
        ratios.pop(0)
    if strict:
        return all(b > a for a, b in zip(ratios, ratios[1:]))
    return all(b >= a for a, b in zip(ratios, ratios[1:]))


# ---------------------------------------------------------------------------
# growth probe for |x - y|^m


@dataclass(frozen=True)
class GrowthProbe:
    exponents: np.ndarray
    norms: np.ndarray
    N: float | None
    r: int
    k: int
    worst_ratio: float


def kernel_ck_norm(d: int, m: float, x, k: int, grid: EvalGrid | None = None) -> float:
    """Grid C^k norm over the unit ball of ``y -> |x - y|^m``."""
    grid = grid or build_grid(d, k)
    spec = KernelSpec(d, m, max(k, 1))
    x = np.asarray(x, dtype=float).reshape(d)
    diff = grid.points - x
    table = np.stack([derive_expansion(spec, a).evaluate_diff(diff) for a in grid.multi_indices])
    return ck_grid_norm(table, grid)


def lemma_growth_probe(d: int, x, k: int, m_range: Sequence[int], r: int,
                       grid: EvalGrid | None = None, max_power: int = 20) -> GrowthProbe:
    """Measure ``||K_m(x, .)||`` on the grid and search ``N in {1, 2, ..., 2^max_power}``
    with ``norm(m) <= N^r (m^{2r} + N^r)`` for every probed ``m``."""
    if 2 * r <= k:
        raise ValueError("need 2r > k")
    x = np.asarray(x, dtype=float).reshape(d)
    if not ANNULUS_INNER < np.linalg.norm(x) < ANNULUS_OUTER:
        raise ValueError("x must lie in the annulus")
    grid = grid or build_grid(d, k)
    ms = np.array(sorted(m_range), dtype=float)
    norms = np.array([kernel_ck_norm(d, m, x, k, grid) for m in ms])
    worst = math.inf
    for p in range(max_power + 1):
        N = 2.0**p
        bound = N**r * (ms ** (2 * r) + N**r)
        ratio = float(np.max(norms / bound))
        worst = min(worst, ratio)
        if ratio <= 1.0:
            return GrowthProbe(ms, norms, N, r, k, ratio)
    raise GrowthProbeError(f"no N <= 2^{max_power} satisfies the bound", worst)


def growth_tail_band(probe: GrowthProbe, m_max: float = -10) -> tuple[float, float]:
    """``(min, max)`` of ``norm(m) / 2^m`` over probed ``m <= m_max``."""
    sel = probe.exponents <= m_max
    if not np.any(sel):
        raise ValueError("no probed exponent in the tail range")
    ratio = probe.norms[sel] / 2.0 ** probe.exponents[sel]
    return float(ratio.min()), float(ratio.max())


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CheckRecord:
    name: str
    measured: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "measured": _jsonable(self.measured),
                "tolerance": _jsonable(self.tolerance), "pass": bool(self.passed)}


def _jsonable(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class VerificationReport:
    checks: list[CheckRecord] = field(default_factory=list)

    def add(self, name: str, measured: float, tolerance: float, passed: bool | None = None) -> CheckRecord:
        rec = CheckRecord(name, float(measured), float(tolerance),
                          bool(measured <= tolerance) if passed is None else bool(passed))
        self.checks.append(rec)
        return rec

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"schema_version": REPORT_SCHEMA_VERSION, "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# identity battery


def fd_laplacian_x(n: float, x, y, h: float = 1e-4) -> float:
    """Central second differences in ``x`` of ``|x - y|^n``, summed over axes.

    Each one-sided difference ``|D + h e|^n - |D|^n`` is formed as
    ``|D|^n expm1(n/2 log1p((2 h D_i + h^2)/|D|^2))`` to avoid cancellation.
    """
    D = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r2 = float(D @ D)
    base = r2 ** (n / 2)
    total = 0.0
    for Di in D:
        plus = base * math.expm1(0.5 * n * math.log1p((2 * h * Di + h * h) / r2))
        minus = base * math.expm1(0.5 * n * math.log1p((-2 * h * Di + h * h) / r2))
        total += (plus + minus) / (h * h)
    return total


def sample_admissible_exponent(rng, d: int, low: float = -5.0, high: float = 5.0, gap: float = 0.1) -> float:
    while True:
        n = rng.uniform(low, high)
        s = n + d
        nearest = 2 * max(1, round(s / 2))
        if abs(s - nearest) >= gap and (s > 0 or abs(s - 2) >= gap):
            return n


def laplacian_recursion_errors(d: int, samples: int = 1000, seed: int = 0, h: float = 1e-4) -> np.ndarray:
    """Relative errors of the finite-difference Laplacian against ``n(n+d-2) K_{n-2}``."""
    rng = np.random.default_rng(seed)
    errs = np.empty(samples)
    for i in range(samples):
        n = sample_admissible_exponent(rng, d)
        x = rng.normal(size=d)
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        y = x - rng.uniform(2, 5) * direction
        rho = float(np.linalg.norm(x - y))
        exact = laplacian_coefficient(KernelSpec(d, n)) * rho ** (n - 2)
        errs[i] = abs(fd_laplacian_x(n, x, y, h) - exact) / abs(exact)
    return errs


def exponential_series_errors(d: int = 1, n: float = -0.5, r: int = 0, k: int = 2, M: int = 30):
    """Max errors over ``(t, rho)`` on a 9x7 grid of ``[-4, 4] x [2, 5]``:
    ``(value error, worst derivative error up to order k)``."""
    spec = KernelSpec(d, n, k_max=k)
    from .kernel import multi_indices

    value_err, deriv_err = 0.0, 0.0
    for t in np.linspace(-4, 4, 9):
        for rho in np.linspace(2, 5, 7):
            x = np.r_[rho, np.zeros(d - 1)]
            y = np.zeros(d)
            for alpha in multi_indices(d, k):
                chk = calculus.exponential_series_check(spec, r, t, x, y, M, alpha)
                if alpha.total == 0:
                    value_err = max(value_err, chk.error)
                else:
                    deriv_err = max(deriv_err, chk.error)
    return value_err, deriv_err


def gamma_transform_errors(d: int = 1, n: float = -0.5, r: int = 0, probes: int = 10):
    """``(max relative error, max slope error)`` on the ``(m, rho)`` probe grid."""
    spec = KernelSpec(d, n)
    rel, slope_err = 0.0, 0.0
    for m in np.linspace(-0.9, 3, probes):
        for rho in np.linspace(2, 5, probes):
            rel = max(rel, calculus.gamma_transform_check(spec, r, m, rho).error)
        slope = calculus.gamma_transform_slope(spec, r, m, 3.0)
        slope_err = max(slope_err, abs(slope - (n - 2 * r + 2 * m + 2)))
    return rel, slope_err


def gaussian_series_errors(M: int = 60):
    """Max relative error of the alternating series over unflagged ``(t, rho)`` probes."""
    worst, flagged = 0.0, 0
    for t in (0.5, 1.0, 2.0, 4.0):
        for rho in np.linspace(0, 3, 7):
            chk = calculus.gaussian_series_check(t, rho, M)
            if chk.cancellation:
                flagged += 1
                continue
            worst = max(worst, chk.error / chk.closed)
    return worst, flagged


def mollification_orders(d: int = 1, t0: float = 0.01, halvings: int = 3):
    """Sup errors of ``pi^{-d/2} f_t - f`` on the unit ball for ``t0 / 2^i``, and the observed orders."""
    target = TargetSpec("cos(pi*|y|^2/2)", d)
    from .fitter import ExtendedTarget

    f = ExtendedTarget(target, 0.5)
    panels = 400 if d == 1 else 120
    rule = calculus.build_box_rule(d, 2.0, panels, 8 if d == 1 else 4)
    ys = build_grid(d, 0, 1 / 8 if d == 1 else 1 / 4).points
    fy = f(ys)
    ts = t0 / 2.0 ** np.arange(halvings + 1)
    errs = np.array([np.max(np.abs(math.pi ** (-d / 2) * calculus.heat_mollify(f, t, ys, rule) - fy))
                     for t in ts])
    orders = np.log2(errs[:-1] / errs[1:])
    return ts, errs, orders


def mollifier_limit(d: int = 1, n: float = -0.5, m_values=(4, 8, 16, 32)):
    spec = KernelSpec(d, n)
    x = np.r_[3.5, np.zeros(d - 1)]
    y = np.zeros(d)
    errs = calculus.mollified_kernel_limit_check(spec, x, y, m_values)
    return np.asarray(m_values, dtype=float), errs, calculus.loglog_slope(m_values, errs)


def run_identity_checks(d: int = 1, seed: int = 0) -> VerificationReport:
    """The identity battery behind the density construction, one record per check."""
    report = VerificationReport()
    errs = laplacian_recursion_errors(d, seed=seed)
    report.add("laplacian_recursion_rel_error", errs.max(), 1e-5)
    for m in range(6):
        spec = KernelSpec(d, -0.5)
        c_next = iterated_laplacian_coefficient(spec, m + 1)
        c_step = iterated_laplacian_coefficient(spec, m) * laplacian_coefficient(spec.with_exponent(-0.5 - 2 * m))
        report.add(f"iterated_coefficient_step_m{m}", abs(c_next - c_step), 0.0)
    report.add("admissible_coefficients_nonzero",
               float(min(abs(iterated_laplacian_coefficient(KernelSpec(d, -0.5), m)) for m in range(8)) > 0),
               1.0, passed=is_admissible_exponent(-0.5, d))
    v_err, d_err = exponential_series_errors(d)
    report.add("exponential_series_abs_error", v_err, 1e-10)
    report.add("exponential_series_derivative_error", d_err, 1e-8)
    rel, slope = gamma_transform_errors(d)
    report.add("gamma_transform_rel_error", rel, 1e-6)
    report.add("gamma_transform_slope_error", slope, 1e-6)
    g_err, _ = gaussian_series_errors()
    report.add("gaussian_series_rel_error", g_err, 1e-6)
    _, _, orders = mollification_orders(d)
    report.add("heat_mollification_min_order", float(orders.min()), 0.9, passed=bool(orders.min() >= 0.9))
    ms, errs, slope = mollifier_limit(d)
    decreasing = bool(np.all(np.diff(errs) < 0))
    report.add("mollifier_limit_slope_gap", abs(slope + 2), 0.3, passed=decreasing and abs(slope + 2) <= 0.3)
    return report
