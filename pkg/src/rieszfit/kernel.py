"""Power-of-distance kernels ``K_n(x, y) = |x - y|**n`` and their derivatives.

Derivatives with respect to ``y`` are kept in closed form as finite sums

    sum_t  coef_t * prod_i (y_i - x_i)**p_ti * |x - y|**(n - 2 j_t)

so that C^k norms on grids never go through runtime finite differences.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SUPPORTED_DIMENSIONS = (1, 2, 3)
DEFAULT_K_MAX = 4
ADMISSIBILITY_TOL = 1e-12


class DomainError(ValueError):
    """Raised when a kernel is evaluated where it is singular or undefined."""


@dataclass(frozen=True)
class KernelSpec:
    """Dimension ``d`` and real exponent ``n`` of ``K_n``."""

    d: int
    n: float
    k_max: int = DEFAULT_K_MAX

    def __post_init__(self):
        if self.d not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {self.d}")
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")
        object.__setattr__(self, "n", float(self.n))

    @property
    def is_admissible(self) -> bool:
        """True iff ``n + d`` is not one of 2, 4, 6, ..."""
        return is_admissible_exponent(self.n, self.d)

    def with_exponent(self, n: float) -> "KernelSpec":
        return KernelSpec(self.d, n, self.k_max)


def is_admissible_exponent(n: float, d: int) -> bool:
    s = n + d
    nearest = round(s)
    if abs(s - nearest) > ADMISSIBILITY_TOL:
        return True
    return not (nearest >= 2 and nearest % 2 == 0)


@dataclass(frozen=True, order=True)
class MultiIndex:
    orders: tuple[int, ...]

    def __post_init__(self):
        orders = tuple(int(o) for o in self.orders)
        if any(o < 0 for o in orders):
            raise ValueError("multi-index orders must be nonnegative")
        object.__setattr__(self, "orders", orders)

    @property
    def total(self) -> int:
        return sum(self.orders)

    @property
    def d(self) -> int:
        return len(self.orders)

    @classmethod
    def zero(cls, d: int) -> "MultiIndex":
        return cls((0,) * d)

    def __str__(self):
        return "(" + ",".join(map(str, self.orders)) + ")"


def multi_indices(d: int, k: int) -> list[MultiIndex]:
    """All multi-indices of length ``d`` with total order ``<= k``.

    Ordered by total order, then lexicographically descending, so for
    ``d=2, k=1`` the result is ``(0,0), (1,0), (0,1)``.
    """
    out = []
    for total in range(k + 1):
        level = [c for c in itertools.product(range(total + 1), repeat=d) if sum(c) == total]
        level.sort(reverse=True)
        out.extend(MultiIndex(c) for c in level)
    return out


@dataclass(frozen=True)
class RadialDerivativeExpansion:
    """Closed form of ``d^alpha/dy^alpha |x - y|**n``.

    ``terms`` holds ``(coefficient, powers, shift)``; the radial exponent of a
    term is ``n - 2 * shift``.
    """

    n: float
    d: int
    terms: tuple[tuple[float, tuple[int, ...], int], ...]

    def exponent(self, shift: int) -> float:
        return self.n - 2 * shift

    @property
    def term_list(self) -> list[tuple[float, tuple[int, ...], float]]:
        """Terms as ``(coefficient, powers, radial exponent)``."""
        return [(c, p, self.exponent(j)) for c, p, j in self.terms]

    def __call__(self, x, y):
        """Evaluate at broadcast-compatible point arrays of trailing size ``d``."""
        diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return self.evaluate_diff(diff)

    def evaluate_diff(self, diff):
        """Evaluate given ``diff = y - x`` directly."""
        diff = np.asarray(diff, dtype=float)
        rho2 = np.sum(diff * diff, axis=-1)
        if np.any(rho2 == 0.0):
            raise DomainError("kernel derivative evaluated at coincident points")
        rho = np.sqrt(rho2)
        out = np.zeros(rho.shape)
        for coef, powers, shift in self.terms:
            term = np.full(rho.shape, coef)
            for i, p in enumerate(powers):
                if p:
                    term = term * diff[..., i] ** p
            out = out + term * rho ** self.exponent(shift)
        return out

    def sup_bound(self, rho_min: float, rho_max: float) -> float:
        """Upper bound for ``|value|`` over all pairs with ``rho_min <= |x-y| <= rho_max``."""
        bound = 0.0
        for coef, powers, shift in self.terms:
            e = sum(powers) + self.exponent(shift)
            bound += abs(coef) * max(rho_min**e, rho_max**e)
        return bound


@lru_cache(maxsize=4096)
def _expansion(n: float, d: int, orders: tuple[int, ...]):
    terms = {((0,) * d, 0): 1.0}
    for i, count in enumerate(orders):
        for _ in range(count):
            new: dict = {}
            for (powers, shift), coef in terms.items():
                p = powers[i]
                if p:
                    key = (powers[:i] + (p - 1,) + powers[i + 1 :], shift)
                    new[key] = new.get(key, 0.0) + coef * p
                e = n - 2 * shift
                if e != 0.0:
                    key = (powers[:i] + (p + 1,) + powers[i + 1 :], shift + 1)
                    new[key] = new.get(key, 0.0) + coef * e
            terms = {key: c for key, c in new.items() if c != 0.0}
    ordered = sorted(terms.items(), key=lambda kv: (kv[0][1], kv[0][0]))
    return tuple((c, powers, shift) for (powers, shift), c in ordered)


def derive_expansion(spec: KernelSpec, alpha: MultiIndex) -> RadialDerivativeExpansion:
    if alpha.d != spec.d:
        raise ValueError(f"multi-index {alpha} does not match dimension {spec.d}")
    if alpha.total > spec.k_max:
        raise ValueError(f"order {alpha.total} exceeds k_max={spec.k_max}")
    return RadialDerivativeExpansion(spec.n, spec.d, _expansion(spec.n, spec.d, alpha.orders))


def kernel_eval(spec: KernelSpec, x, y):
    """``|x - y|**n``; raises :class:`DomainError` at coincident points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape[-1] != spec.d or y.shape[-1] != spec.d:
        raise ValueError("point dimension does not match spec")
    diff = x - y
    rho = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(rho == 0.0):
        raise DomainError("K_n is undefined at coincident points")
    out = rho**spec.n
    return float(out) if np.ndim(out) == 0 else out


def laplacian_coefficient(spec: KernelSpec) -> float:
    """``c`` with ``Lap_x K_n = c K_{n-2}``, namely ``n (n + d - 2)``."""
    n = spec.n
    return n * (n + spec.d - 2)


def iterated_laplacian_coefficient(spec: KernelSpec, m: int) -> float:
    """``c_m`` with ``Lap_x^m K_n = c_m K_{n-2m}``; ``c_0 = 1``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    c = 1.0
    for i in range(m):
        c = c * laplacian_coefficient(spec.with_exponent(spec.n - 2 * i))
    return c
