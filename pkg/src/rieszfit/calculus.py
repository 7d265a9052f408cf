"""Quadrature rules and convergence checks for the analytic identities.

Rules are plain node/weight arrays. Balls and annuli use spherical product
grids (Gauss-Legendre in the radius, trapezoid/Gauss in the angles) for
``d >= 2`` and composite Gauss-Legendre intervals for ``d = 1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from .kernel import KernelSpec, MultiIndex, derive_expansion, kernel_eval


class DivergentIntegralError(ValueError):
    pass


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Gauss-Legendre nodes and weights on ``[-1, 1]``."""
    t, w = np.polynomial.legendre.leggauss(order)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@lru_cache(maxsize=None)
def gauss_jacobi(order: int, alpha: float, beta: float):
    """Nodes/weights on ``[-1, 1]`` for the weight ``(1-t)**alpha (1+t)**beta``."""
    t, w = special.roots_jacobi(order, alpha, beta)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def composite_gauss(edges, order: int):
    """Composite Gauss-Legendre rule on consecutive panels ``edges[i], edges[i+1]``."""
    edges = np.asarray(edges, dtype=float)
    t, w = gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * t
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


@lru_cache(maxsize=None)
def sphere_directions(d: int, resolution: int):
    """Unit directions and weights summing to the area of ``S^{d-1}``.

    ``d=1`` gives the two points ``+1, -1`` with unit weights. ``d=2`` uses
    ``resolution`` equispaced angles. ``d=3`` uses Gauss nodes in ``cos(theta)``
    times ``2 * resolution`` equispaced azimuths.
    """
    if d == 1:
        dirs, w = np.array([[1.0], [-1.0]]), np.ones(2)
    elif d == 2:
        phi = 2 * np.pi * np.arange(resolution) / resolution
        dirs = np.column_stack([np.cos(phi), np.sin(phi)])
        w = np.full(resolution, 2 * np.pi / resolution)
    elif d == 3:
        ct, wt = gauss_legendre(resolution)
        na = 2 * resolution
        phi = 2 * np.pi * np.arange(na) / na
        st = np.sqrt(1 - ct**2)
        dirs = np.column_stack(
            [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(ct, na)]
        )
        w = np.repeat(wt, na) * (2 * np.pi / na)
    else:
        raise ValueError(f"unsupported dimension {d}")
    dirs.setflags(write=False)
    w.setflags(write=False)
    return dirs, w


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int, radius: float) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes ``(N, d)`` and positive weights ``(N,)`` over a tagged domain.

    For ``ball``/``annulus`` the domain is ``inner < |x - center| < outer``
    (``inner = 0`` for a ball); ``box`` is the cube of half-width ``outer``;
    ``half-line`` is ``(0, inf)`` with ``d = 1``. ``degree`` is the total
    polynomial degree integrated exactly (``-1`` when no such claim holds).
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: str
    degree: int
    center: np.ndarray = field(default_factory=lambda: np.zeros(1))
    inner: float = 0.0
    outer: float = math.inf

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    @property
    def measure(self) -> float:
        if self.domain in ("ball", "annulus"):
            return ball_volume(self.d, self.outer) - ball_volume(self.d, self.inner)
        if self.domain == "box":
            return (2 * self.outer) ** self.d
        return math.inf

    def integrate(self, f: Callable) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def covers_ball(self, center, radius: float) -> bool:
        """Whether the closed ball ``|x - center| <= radius`` lies inside the domain."""
        center = np.asarray(center, dtype=float)
        if self.domain == "box":
            return bool(np.all(np.abs(center) + radius <= self.outer))
        if self.domain not in ("ball", "annulus"):
            return False
        dist = float(np.linalg.norm(center - self.center))
        if dist + radius > self.outer:
            return False
        return self.inner == 0.0 or dist - radius >= self.inner


def _finalize(nodes, weights, **kw) -> QuadratureRule:
    nodes = np.ascontiguousarray(nodes, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, **kw)


def _shell_rule(d, inner, outer, resolution, panels, angular, center):
    r, wr = composite_gauss(np.linspace(inner, outer, panels + 1), resolution)
    dirs, wa = sphere_directions(d, angular)
    if d == 1:
        nodes = np.concatenate([r, -r])[:, None]
        weights = np.concatenate([wr, wr])
    else:
        nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        weights = np.outer(wr * r ** (d - 1), wa).ravel()
    return nodes + center, weights


def build_ball_rule(d: int, radius: float, resolution: int = 32, center=None, panels: int = 1,
                    angular: int | None = None) -> QuadratureRule:
    """Rule on the ball ``|x - center| < radius``.

    In ``d = 1`` this is composite Gauss on ``(c - R, c + R)`` with ``panels``
    panels of ``resolution`` nodes. In ``d >= 2`` it is ``resolution`` radial
    Gauss nodes per panel times a direction rule.
    """
    if radius <= 0 or resolution < 2:
        raise ValueError("need radius > 0 and resolution >= 2")
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float).reshape(d)
    angular = angular or (2 * resolution if d == 2 else resolution)
    if d == 1:
        x, w = composite_gauss(np.linspace(-radius, radius, panels + 1), resolution)
        nodes, weights, degree = x[:, None] + center, w, 2 * resolution - 1
    else:
        nodes, weights = _shell_rule(d, 0.0, radius, resolution, panels, angular, center)
        degree = min(2 * resolution - d, angular - 1 if d == 2 else 2 * angular - 1)
    return _finalize(nodes, weights, domain="ball", degree=degree, center=center,
                     inner=0.0, outer=float(radius))


def build_annulus_rule(d: int, inner: float = 3.0, outer: float = 4.0, resolution: int = 32,
                       panels: int = 1, angular: int | None = None) -> QuadratureRule:
    """Rule on ``inner < |x| < outer``; in ``d = 1`` the two intervals ``±(inner, outer)``."""
    if not (0 < inner < outer) or resolution < 2:
        raise ValueError(f"invalid annulus radii ({inner}, {outer}) or resolution {resolution}")
    angular = angular or (4 * resolution if d == 2 else resolution)
    nodes, weights = _shell_rule(d, inner, outer, resolution, panels, angular, np.zeros(d))
    if d == 1:
        degree = 2 * resolution - 1
    else:
        # radial weight r^(d-1) costs d-1 degrees of exactness
        degree = min(2 * resolution - d, angular - 1 if d == 2 else 2 * angular - 1)
    return _finalize(nodes, weights, domain="annulus", degree=degree, center=np.zeros(d),
                     inner=float(inner), outer=float(outer))


def build_box_rule(d: int, half_width: float, panels: int, order: int = 8) -> QuadratureRule:
    """Tensor composite Gauss rule on ``[-h, h]^d``."""
    x, w = composite_gauss(np.linspace(-half_width, half_width, panels + 1), order)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    nodes = np.column_stack([g.ravel() for g in grids])
    weights = np.prod(np.column_stack([g.ravel() for g in wgrids]), axis=1)
    return _finalize(nodes, weights, domain="box", degree=2 * order - 1, center=np.zeros(d),
                     inner=0.0, outer=float(half_width))


def build_half_line_rule(scale: float = 1.0, peak: float = 0.0, resolution: int = 16,
                         grading: float = 0.25, depth: float = 1e-80, tail: float = 60.0) -> QuadratureRule:
    """Rule on ``(0, inf)`` for integrands like ``t**m exp(-t / scale)``, ``m > -1``.

    Panels are geometrically graded toward 0 (down to ``depth * scale``) to
    absorb the ``t**m`` endpoint singularity, split at ``peak``, and cut at
    ``peak + tail * scale`` where the exponential factor is below ~1e-20.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    levels = math.ceil(math.log(depth) / math.log(grading))
    graded = scale * grading ** np.arange(levels, -1, -1)
    upper = max(peak, 0.0) + tail * scale
    body = np.arange(scale, upper, scale)
    edges = np.unique(np.concatenate([[0.0], graded, body, [upper]] + ([[peak]] if peak > scale else [])))
    x, w = composite_gauss(edges, resolution)
    keep = x > 0
    return _finalize(x[keep, None], w[keep], domain="half-line", degree=-1,
                     center=np.zeros(1), inner=0.0, outer=math.inf)


# ---------------------------------------------------------------------------
# bumps and mollifiers


def bump_profile(q):
    """``exp(-1/(1-q))`` for ``q < 1`` and exactly 0 otherwise, with ``q = |z|^2``."""
    q = np.asarray(q, dtype=float)
    inside = q < 1.0
    out = np.zeros(q.shape)
    out[inside] = np.exp(-1.0 / (1.0 - q[inside]))
    return out


@lru_cache(maxsize=None)
def bump_mass(d: int) -> float:
    """``int exp(-1/(1-|z|^2)) dz`` over the unit ball of ``R^d``."""
    radial, _ = integrate.quad(lambda r: r ** (d - 1) * math.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
                               epsabs=0.0, epsrel=1e-13, limit=200)
    return (2.0 if d == 1 else sphere_area(d)) * radial


@dataclass(frozen=True)
class MollifierSpec:
    """``zeta_m(z) = m^d zeta(m z)`` with ``zeta`` the normalized standard bump."""

    d: int
    m: float

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("scale index m must be positive")

    @property
    def support_radius(self) -> float:
        return 1.0 / self.m

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        q = self.m**2 * np.sum(z * z, axis=-1)
        return self.m**self.d * bump_profile(q) / bump_mass(self.d)

    def rule(self, center, resolution: int = 64) -> QuadratureRule:
        return build_ball_rule(self.d, self.support_radius, resolution, center=center)


# ---------------------------------------------------------------------------
# identity checks


class SeriesCheck(NamedTuple):
    partial: float
    closed: float
    error: float


class GaussianSeriesCheck(NamedTuple):
    partial: float
    closed: float
    error: float
    cancellation: bool


def heat_mollify(f: Callable, t: float, y, rule: QuadratureRule):
    """``t^{-d/2} * int f(x) exp(-|x - y|^2 / t) dx`` by the given rule.

    ``y`` may be a single point or an array of points ``(P, d)``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    fx = np.asarray(f(rule.nodes), dtype=float) * rule.weights
    live = fx != 0.0
    nodes, fx = rule.nodes[live], fx[live]
    out = np.empty(len(y))
    for i, yi in enumerate(y):
        r2 = np.sum((nodes - yi) ** 2, axis=1)
        out[i] = np.dot(fx, np.exp(-r2 / t))
    out *= t ** (-rule.d / 2)
    return float(out[0]) if single else out


def mollified_kernel_limit_check(spec: KernelSpec, x, y, m_values: Sequence[float],
                                 resolution: int = 64, inner: float = 3.0, outer: float = 4.0):
    """``|int K_n(z, y) zeta_m(z - x) dz - K_n(x, y)|`` for each ``m``."""
    x = np.asarray(x, dtype=float).reshape(spec.d)
    y = np.asarray(y, dtype=float).reshape(spec.d)
    r = float(np.linalg.norm(x))
    room = min(r - inner, outer - r)
    if room <= 1.0 / min(m_values):
        raise ValueError(f"x at |x|={r} is too close to the annulus boundary for m={min(m_values)}")
    exact = kernel_eval(spec, x, y)
    errors = []
    for m in m_values:
        moll = MollifierSpec(spec.d, m)
        rule = moll.rule(x, resolution)
        vals = kernel_eval(spec, rule.nodes, y[None, :]) * moll(rule.nodes - x)
        errors.append(abs(float(np.dot(rule.weights, vals)) - exact))
    return np.array(errors)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log ys`` against ``log xs``."""
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _exp_factor_derivatives(d, t, diff, alphas):
    """Derivatives of ``exp(t |y-x|^-2)`` in ``y`` for every multi-index in ``alphas``."""
    gspec = KernelSpec(d, -2.0, k_max=max(a.total for a in alphas) + 1)
    gcache: dict = {}

    def g(beta):
        if beta not in gcache:
            gcache[beta] = t * derive_expansion(gspec, MultiIndex(beta)).evaluate_diff(diff)
        return gcache[beta]

    ecache = {(0,) * d: np.exp(g((0,) * d))}

    def e(alpha):
        if alpha in ecache:
            return ecache[alpha]
        i = next(j for j, a in enumerate(alpha) if a)
        rest = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1 :]
        total = 0.0
        for beta in _sub_indices(rest):
            up = beta[:i] + (beta[i] + 1,) + beta[i + 1 :]
            comp = tuple(a - b for a, b in zip(rest, beta))
            total = total + _multi_binom(rest, beta) * g(up) * e(comp)
        ecache[alpha] = total
        return total

    return {a.orders: e(a.orders) for a in alphas}


def _sub_indices(alpha):
    return list(itertools.product(*[range(a + 1) for a in alpha]))


def _multi_binom(alpha, beta) -> float:
    out = 1
    for a, b in zip(alpha, beta):
        out *= math.comb(a, b)
    return float(out)


def exp_radial_derivative(spec: KernelSpec, t: float, alpha: MultiIndex, x, y):
    """``d^alpha/dy^alpha [ |x-y|^n exp(t / |x-y|^2) ]`` by the product rule."""
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    wide = KernelSpec(spec.d, spec.n, k_max=max(spec.k_max, alpha.total))
    subs = [MultiIndex(b) for b in _sub_indices(alpha.orders)]
    efac = _exp_factor_derivatives(spec.d, t, diff, subs)
    total = 0.0
    for beta in subs:
        comp = tuple(a - b for a, b in zip(alpha.orders, beta.orders))
        total = total + _multi_binom(alpha.orders, beta.orders) * \
            derive_expansion(wide, beta).evaluate_diff(diff) * efac[comp]
    return total


def exponential_series_check(spec: KernelSpec, r: int, t: float, x, y, M: int,
                             alpha: MultiIndex | None = None) -> SeriesCheck:
    """Partial sum of ``sum_m t^m/m! d^alpha K_{n-2r-2m}(x, y)`` against the closed form
    ``d^alpha [K_{n-2r} exp(t/|x-y|^2)]``."""
    x = np.asarray(x, dtype=float).reshape(spec.d)
    y = np.asarray(y, dtype=float).reshape(spec.d)
    alpha = alpha or MultiIndex.zero(spec.d)
    base = spec.n - 2 * r
    diff = y - x
    k_max = max(spec.k_max, alpha.total)
    terms = []
    coef = 1.0
    for m in range(M + 1):
        if m:
            coef *= t / m
        term_spec = KernelSpec(spec.d, base - 2 * m, k_max=k_max)
        terms.append(coef * float(derive_expansion(term_spec, alpha).evaluate_diff(diff)))
    partial = math.fsum(terms)
    closed = float(exp_radial_derivative(KernelSpec(spec.d, base, k_max), t, alpha, x, y))
    return SeriesCheck(partial, closed, abs(partial - closed))


def exponential_series_tail_bound(spec: KernelSpec, r: int, t: float, rho: float, M: int) -> float:
    """Lagrange remainder bound for the undifferentiated series at ``|x-y| = rho``.

    The tail is ``rho^{n-2r} |R_M(t/rho^2)|`` with
    ``|R_M(u)| <= |u|^{M+1}/(M+1)! * exp(max(u, 0))``.
    """
    u = t / rho**2
    return rho ** (spec.n - 2 * r) * abs(u) ** (M + 1) / math.factorial(M + 1) * math.exp(max(u, 0.0))


def gamma_transform_check(spec: KernelSpec, r: int, m: float, rho: float,
                          half_line_rule: QuadratureRule | None = None) -> SeriesCheck:
    """``rho^{n-2r} int_0^inf t^m exp(-t/rho^2) dt`` against ``Gamma(m+1) rho^{n-2r+2m+2}``.

    ``error`` is the relative difference. When no rule is given one is built
    with scale ``rho^2`` and a split at the integrand peak ``m rho^2``.
    """
    if m <= -1:
        raise DivergentIntegralError(f"integral diverges at t=0 for m={m} <= -1")
    if rho < 2:
        raise ValueError("rho must be at least 2")
    scale = rho * rho
    rule = half_line_rule or build_half_line_rule(scale, peak=max(m, 0.0) * scale)
    t = rule.nodes[:, 0]
    integrand = np.exp(m * np.log(t) - t / scale)
    numeric = rho ** (spec.n - 2 * r) * math.fsum(rule.weights * integrand)
    closed = math.gamma(m + 1) * rho ** (spec.n - 2 * r + 2 * m + 2)
    return SeriesCheck(numeric, closed, abs(numeric - closed) / abs(closed))


def gamma_transform_slope(spec: KernelSpec, r: int, m: float, rho: float, ratio: float = 1.25) -> float:
    """Measured exponent of ``rho`` in the numeric Gamma transform (two-point log-log slope)."""
    a = gamma_transform_check(spec, r, m, rho).partial
    b = gamma_transform_check(spec, r, m, rho * ratio).partial
    return math.log(b / a) / math.log(ratio)


def gaussian_series_check(t: float, rho: float, M: int, guard: float = 1e12) -> GaussianSeriesCheck:
    """Partial sum of ``sum_m (-1)^m/m! t^{-m} rho^{2m}`` against ``exp(-rho^2/t)``.

    Terms are accumulated with exact (``math.fsum``) summation; ``cancellation``
    flags results whose largest term exceeds ``guard`` times the sum.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    u = rho * rho / t
    terms = [1.0]
    term = 1.0
    for m in range(1, M + 1):
        term = -term * u / m
        terms.append(term)
    partial = math.fsum(terms)
    closed = math.exp(-u)
    biggest = max(abs(v) for v in terms)
    cancellation = biggest > guard * abs(partial) if partial != 0.0 else biggest > 0.0
    return GaussianSeriesCheck(partial, closed, abs(partial - closed), cancellation)
