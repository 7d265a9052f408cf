"""Source densities built from bump atoms in the annulus 3 < |x| < 4.

``K_n g`` and its ``y``-derivatives are computed as

    d^alpha (K_n g)(y) = sum_j c_j int d^alpha_y |x - y|^n  atom_j(x) dx

with a Gauss rule over each atom's ball. Design matrices stack one block of
rows per multi-index (multi-index major, grid points minor).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import (QuadratureRule, build_ball_rule, bump_mass, bump_profile, gauss_jacobi,
                       sphere_directions)
from .kernel import DomainError, KernelSpec, MultiIndex, derive_expansion, multi_indices

ANNULUS_INNER = 3.0
ANNULUS_OUTER = 4.0
MID_RADIUS = 3.5
MAX_ATOM_RADIUS = 0.4
# atoms sized exactly at half the spacing would touch the annulus boundary
SPACING_SHRINK = 0.95
DEFAULT_ATOM_RESOLUTION = {1: 64, 2: 24, 3: 12}


@dataclass(frozen=True)
class BumpAtom:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))
        r = math.hypot(*center)
        if self.radius <= 0:
            raise ValueError("atom radius must be positive")
        if not (r - self.radius > ANNULUS_INNER and r + self.radius < ANNULUS_OUTER):
            raise ValueError(
                f"atom at |c|={r:.6g} with radius {self.radius:.6g} is not strictly inside the annulus"
            )

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def mass(self) -> float:
        return self.radius**self.d * bump_mass(self.d)

    def __call__(self, x):
        z = (np.asarray(x, dtype=float) - np.asarray(self.center)) / self.radius
        return bump_profile(np.sum(z * z, axis=-1))

    def hessian(self, x):
        """Second derivatives ``(..., d, d)``; exactly zero outside the ball."""
        c = np.asarray(self.center)
        dz = np.asarray(x, dtype=float) - c
        r2 = self.radius**2
        q = np.sum(dz * dz, axis=-1) / r2
        phi = bump_profile(q)
        inside = q < 1.0
        s = np.where(inside, 1.0 - q, 1.0)
        d1 = np.where(inside, -phi / s**2, 0.0)
        d2 = np.where(inside, phi * (1.0 / s**4 - 2.0 / s**3), 0.0)
        eye = np.eye(self.d)
        return (d2[..., None, None] * 4.0 * dz[..., :, None] * dz[..., None, :] / r2**2
                + d1[..., None, None] * 2.0 * eye / r2)

    def rule(self, resolution: int | None = None) -> QuadratureRule:
        return build_ball_rule(self.d, self.radius, resolution or DEFAULT_ATOM_RESOLUTION[self.d],
                               center=self.center)


@dataclass(frozen=True)
class SourceDensity:
    spec: KernelSpec
    atoms: tuple[BumpAtom, ...]
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        coef = np.array(self.coefficients, dtype=float).ravel()
        if len(atoms) != len(coef):
            raise ValueError("need one coefficient per atom")
        if any(a.d != self.spec.d for a in atoms):
            raise ValueError("atom dimension does not match kernel spec")
        coef.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "coefficients", coef)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for c, atom in zip(self.coefficients, self.atoms):
            if c != 0.0:
                out = out + c * atom(x)
        return out

    @property
    def total_mass(self) -> float:
        return float(sum(c * a.mass for c, a in zip(self.coefficients, self.atoms)))

    def to_dict(self) -> dict:
        return {
            "d": self.spec.d,
            "n": self.spec.n,
            "atoms": [{"center": list(a.center), "radius": a.radius} for a in self.atoms],
            "coefficients": [float(c) for c in self.coefficients],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict, k_max: int | None = None) -> "SourceDensity":
        spec = KernelSpec(int(data["d"]), float(data["n"]), *(() if k_max is None else (k_max,)))
        atoms = [BumpAtom(tuple(a["center"]), a["radius"]) for a in data["atoms"]]
        return cls(spec, tuple(atoms), np.asarray(data["coefficients"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "SourceDensity":
        return cls.from_dict(json.loads(text))


def default_layout(d: int, count: int) -> list[BumpAtom]:
    """Equally spaced atoms on the mid-sphere ``|c| = 3.5``.

    In ``d = 1`` the atoms are split evenly between ``(3, 4)`` and ``(-4, -3)``
    and equally spaced inside each interval. The radius is
    ``min(0.4, 0.95 * spacing / 2)``.
    """
    if count < 1:
        raise ValueError("atom count must be positive")
    if d == 1:
        if count % 2:
            raise ValueError("d=1 layouts need an even atom count")
        q = count // 2
        h = (ANNULUS_OUTER - ANNULUS_INNER) / q
        radius = min(MAX_ATOM_RADIUS, SPACING_SHRINK * h / 2)
        right = ANNULUS_INNER + (np.arange(q) + 0.5) * h
        centers = np.concatenate([-right[::-1], right])[:, None]
    elif d == 2:
        phi = 2 * np.pi * np.arange(count) / count
        centers = MID_RADIUS * np.column_stack([np.cos(phi), np.sin(phi)])
        spacing = 2 * MID_RADIUS * math.sin(math.pi / count) if count > 1 else math.inf
        radius = min(MAX_ATOM_RADIUS, SPACING_SHRINK * spacing / 2)
    elif d == 3:
        centers = MID_RADIUS * _fibonacci_sphere(count)
        if count > 1:
            gaps = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
            spacing = float(np.min(gaps[~np.eye(count, dtype=bool)]))
        else:
            spacing = math.inf
        radius = min(MAX_ATOM_RADIUS, SPACING_SHRINK * spacing / 2)
    else:
        raise ValueError(f"unsupported dimension {d}")
    return [BumpAtom(tuple(c), radius) for c in centers]


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    phi = np.pi * (1 + 5**0.5) * i
    rho = np.sqrt(1 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def nested_layouts(d: int, schedule: Sequence[int]) -> list[list[BumpAtom]]:
    """Cumulative layouts: step ``i`` holds every atom of the default layouts
    for ``schedule[0..i]``, so each step's basis contains the previous one."""
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    out, acc = [], []
    for count in schedule:
        acc = acc + default_layout(d, count)
        out.append(list(acc))
    return out


@dataclass(frozen=True)
class EvalGrid:
    points: np.ndarray
    multi_indices: tuple[MultiIndex, ...]
    spacing: float
    k: int

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def refined(self, factor: int = 2) -> "EvalGrid":
        return build_grid(self.d, self.k, self.spacing / factor)


def default_spacing(d: int) -> float:
    return 2 / 16 if d <= 2 else 2 / 8


def build_grid(d: int, k: int, spacing: float | None = None, radius: float = 1.0) -> EvalGrid:
    """Tensor grid of spacing ``spacing`` on ``[-radius, radius]^d`` cut to ``|y| <= radius``."""
    h = spacing or default_spacing(d)
    steps = int(round(2 * radius / h))
    if steps < 1 or abs(steps * h - 2 * radius) > 1e-9:
        raise ValueError(f"spacing {h} must divide the diameter {2 * radius}")
    axis = np.linspace(-radius, radius, steps + 1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    pts = pts[np.sum(pts * pts, axis=1) <= radius**2 * (1 + 1e-12)]
    pts.setflags(write=False)
    return EvalGrid(pts, tuple(multi_indices(d, k)), float(h), int(k))


def _atom_rule(atom: BumpAtom, rule: QuadratureRule | None, resolution: int | None):
    if rule is None:
        return atom.rule(resolution)
    if not rule.covers_ball(atom.center, atom.radius):
        raise ValueError(f"quadrature rule ({rule.domain}) does not contain the support of {atom}")
    return rule


def _atom_block(spec: KernelSpec, atom: BumpAtom, alphas, y, rule, resolution):
    rule = _atom_rule(atom, rule, resolution)
    w = rule.weights * atom(rule.nodes)
    live = w != 0.0
    nodes, w = rule.nodes[live], w[live]
    diff = y[:, None, :] - nodes[None, :, :]
    return np.stack([derive_expansion(spec, a).evaluate_diff(diff) @ w for a in alphas])


def atom_potential(spec: KernelSpec, atom: BumpAtom, alpha: MultiIndex, y,
                   rule: QuadratureRule | None = None, resolution: int | None = None):
    """``int d^alpha_y K_n(x - y) atom(x) dx`` at one point or an array of points."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    block = _atom_block(spec, atom, [alpha], np.atleast_2d(y), rule, resolution)[0]
    return float(block[0]) if single else block


def design_matrix(spec: KernelSpec, atoms: Sequence[BumpAtom], grid: EvalGrid,
                  rule: QuadratureRule | None = None, resolution: int | None = None) -> np.ndarray:
    """Matrix with row ``a * P + p`` for multi-index ``a`` and grid point ``p``, one column per atom."""
    if not atoms:
        raise ValueError("empty atom list")
    if len(grid.points) == 0:
        raise ValueError("empty grid")
    cols = [_atom_block(spec, atom, grid.multi_indices, grid.points, rule, resolution).ravel()
            for atom in atoms]
    return np.column_stack(cols)


def potential_on_grid(spec: KernelSpec, g: SourceDensity, grid: EvalGrid,
                      rule: QuadratureRule | None = None, resolution: int | None = None) -> np.ndarray:
    """Table ``(len(multi_indices), len(points))`` of ``d^alpha (K_n g)`` on the grid."""
    A = design_matrix(spec, g.atoms, grid, rule, resolution)
    return (A @ g.coefficients).reshape(len(grid.multi_indices), len(grid.points))


def table_from_vector(v, grid: EvalGrid) -> np.ndarray:
    return np.asarray(v).reshape(len(grid.multi_indices), len(grid.points))


def ck_grid_norm(table, grid: EvalGrid) -> float:
    """``sum over multi-indices of max over points |table|``."""
    table = np.asarray(table, dtype=float).reshape(len(grid.multi_indices), -1)
    return float(np.sum(np.max(np.abs(table), axis=1)))


def derivative_bound(spec: KernelSpec, g: SourceDensity, alpha: MultiIndex) -> float:
    """Bound on ``|d^alpha (K_n g)|`` over the unit ball (source distance in [2, 5])."""
    sup = derive_expansion(spec, alpha).sup_bound(ANNULUS_INNER - 1.0, ANNULUS_OUTER + 1.0)
    mass = max(a.mass for a in g.atoms)
    return float(np.sum(np.abs(g.coefficients))) * mass * sup


# ---------------------------------------------------------------------------
# evaluation at arbitrary points, including inside the support


def _radial_singular(spec, atom, x, weight_fn, resolution, angular):
    """``int |x - xi|^n h(xi) dxi`` over the atom ball for ``x`` inside it, in polar
    coordinates about ``x`` with a Gauss-Jacobi rule absorbing ``rho^{n+d-1}``."""
    d = spec.d
    beta = spec.n + d - 1
    t, w = gauss_jacobi(resolution, 0.0, beta)
    dirs, wa = sphere_directions(d, angular)
    c = np.asarray(atom.center)
    p = dirs @ (x - c)
    gap = atom.radius**2 - float(np.sum((x - c) ** 2))
    r_exit = -p + np.sqrt(p * p + gap)
    rho = r_exit[:, None] * (1 + t[None, :]) / 2
    pts = x + rho[..., None] * dirs[:, None, :]
    vals = weight_fn(pts)
    scale = (r_exit / 2) ** (spec.n + d)
    per_dir = np.tensordot(w, vals, axes=([0], [1]))
    return np.tensordot(wa * scale, per_dir, axes=([0], [0]))


_CHUNK_ENTRIES = 1 << 21


def _convolve_anywhere(spec: KernelSpec, g: SourceDensity, points, field_fn, out_shape,
                       resolution: int | None, singular_resolution: int):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros((len(points),) + out_shape)
    angular = {1: 2, 2: 64, 3: 16}[spec.d]
    for coef, atom in zip(g.coefficients, g.atoms):
        if coef == 0.0:
            continue
        c = np.asarray(atom.center)
        dist = np.linalg.norm(points - c, axis=1)
        inside = dist < atom.radius
        if np.any(inside) and spec.n <= -spec.d:
            raise DomainError("K_n g is not defined inside the support for n <= -d")
        rule = atom.rule(resolution)
        h = field_fn(atom, rule.nodes)
        wh = rule.weights.reshape((-1,) + (1,) * len(out_shape)) * h
        outside = ~inside
        idx = np.flatnonzero(outside)
        block = max(1, _CHUNK_ENTRIES // len(rule.nodes))
        for start in range(0, len(idx), block):
            rows = idx[start:start + block]
            diff = points[rows][:, None, :] - rule.nodes[None, :, :]
            K = np.sqrt(np.sum(diff * diff, axis=-1)) ** spec.n
            out[rows] += coef * np.tensordot(K, wh, axes=([1], [0]))
        for i in np.flatnonzero(inside):
            out[i] += coef * _radial_singular(spec, atom, points[i], lambda z: field_fn(atom, z),
                                              singular_resolution, angular)
    return out


def potential_anywhere(spec: KernelSpec, g: SourceDensity, points, resolution: int | None = None,
                       singular_resolution: int = 48) -> np.ndarray:
    """``K_n g`` at arbitrary points, including inside atom supports (needs ``n > -d``)."""
    return _convolve_anywhere(spec, g, points, lambda atom, z: atom(z), (), resolution,
                              singular_resolution)


def hessian_anywhere(spec: KernelSpec, g: SourceDensity, points, resolution: int | None = None,
                     singular_resolution: int = 48) -> np.ndarray:
    """Hessian of ``K_n g`` as ``K_n`` convolved with the atoms' second derivatives."""
    d = spec.d
    return _convolve_anywhere(spec, g, points, lambda atom, z: atom.hessian(z), (d, d), resolution,
                              singular_resolution)
