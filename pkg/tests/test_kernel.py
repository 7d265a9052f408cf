import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszfit.kernel import (DomainError, KernelSpec, MultiIndex, derive_expansion, is_admissible_exponent,
                             iterated_laplacian_coefficient, kernel_eval, laplacian_coefficient, multi_indices)
from rieszfit.verifier import fd_laplacian_x, laplacian_recursion_errors


def test_kernel_eval_examples():
    assert kernel_eval(KernelSpec(1, 2), [3.5], [0.5]) == 9.0
    assert kernel_eval(KernelSpec(2, 0), [1.0, 2.0], [0.3, -1.0]) == 1.0
    assert kernel_eval(KernelSpec(2, -0.5), [3.0, 0.0], [0.0, 0.0]) == pytest.approx(3**-0.5, rel=1e-15)


def test_kernel_eval_coincident_points():
    with pytest.raises(DomainError):
        kernel_eval(KernelSpec(2, -0.5), [1.0, 1.0], [1.0, 1.0])


@pytest.mark.parametrize("n,d,ok", [(-1, 3, False), (0, 2, False), (2, 2, False), (-0.5, 1, True),
                                    (1, 2, True), (-3, 1, True), (0.5, 1, True), (2 + 1e-13, 2, False)])
def test_admissibility(n, d, ok):
    assert is_admissible_exponent(n, d) is ok
    assert KernelSpec(d, n).is_admissible is ok


def test_unsupported_dimension():
    with pytest.raises(ValueError):
        KernelSpec(4, -0.5)


def test_multi_index_count():
    for d in (1, 2, 3):
        for k in range(5):
            expected = sum(math.comb(j + d - 1, d - 1) for j in range(k + 1))
            assert len(multi_indices(d, k)) == expected


def test_expansion_trivial_cases():
    spec = KernelSpec(1, -0.5)
    assert derive_expansion(spec, MultiIndex((0,))).term_list == [(1.0, (0,), -0.5)]
    assert derive_expansion(spec, MultiIndex((1,))).term_list == [(-0.5, (1,), -2.5)]


def test_expansion_order_cap():
    with pytest.raises(ValueError):
        derive_expansion(KernelSpec(1, -0.5, k_max=2), MultiIndex((3,)))


def test_second_derivative_against_central_difference():
    spec = KernelSpec(1, -0.5)
    h = 1e-4
    f = lambda y: abs(3.5 - y) ** -0.5
    fd = (f(h) - 2 * f(0.0) + f(-h)) / h**2
    exact = derive_expansion(spec, MultiIndex((2,)))([3.5], [0.0])
    assert abs(exact - fd) / abs(exact) <= 1e-6


def _nested_fd(n, x, y, orders, h=mpmath.mpf("1e-8")):
    """Nested central differences in y of |x - y|^n, evaluated at 40 digits."""
    x = [mpmath.mpf(float(v)) for v in x]

    def rec(point, axis):
        if axis == len(orders):
            return mpmath.sqrt(sum((a - b) ** 2 for a, b in zip(x, point))) ** n
        k = orders[axis]
        total = mpmath.mpf(0)
        for j in range(k + 1):
            shifted = list(point)
            shifted[axis] += (mpmath.mpf(k) / 2 - j) * h
            total += (-1) ** j * math.comb(k, j) * rec(shifted, axis + 1)
        return total / h**k

    with mpmath.workdps(40):
        return float(rec([mpmath.mpf(float(v)) for v in y], 0))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_expansion_matches_nested_differences(d, rng):
    worst = 0.0
    for _ in range(4):
        n = rng.uniform(-3, 3)
        spec = KernelSpec(d, n)
        direction = rng.normal(size=d)
        y = rng.uniform(-0.5, 0.5, d)
        x = y + 3 * direction / np.linalg.norm(direction)
        for alpha in multi_indices(d, 4):
            if alpha.total == 0:
                continue
            exact = derive_expansion(spec, alpha)(x, y)
            fd = _nested_fd(n, x, y, alpha.orders)
            worst = max(worst, abs(exact - fd) / abs(fd))
    assert worst <= 1e-4


def test_laplacian_coefficient_examples():
    assert laplacian_coefficient(KernelSpec(3, -1)) == 0.0
    assert laplacian_coefficient(KernelSpec(3, 2)) == 6.0
    assert laplacian_coefficient(KernelSpec(1, -0.5)) == 0.75


def test_iterated_coefficient_examples():
    assert iterated_laplacian_coefficient(KernelSpec(2, 0.3), 0) == 1.0
    assert iterated_laplacian_coefficient(KernelSpec(1, -0.5), 2) == 6.5625


@given(st.floats(-5, 5), st.integers(1, 3), st.integers(0, 8))
def test_iterated_coefficient_recursion_is_exact(n, d, m):
    spec = KernelSpec(d, n)
    step = iterated_laplacian_coefficient(spec, m) * laplacian_coefficient(spec.with_exponent(n - 2 * m))
    assert iterated_laplacian_coefficient(spec, m + 1) == step


@given(st.floats(-5, 5).filter(lambda n: abs(n - round(n)) > 1e-3), st.integers(1, 3), st.integers(0, 10))
def test_noninteger_exponents_never_annihilate(n, d, m):
    assert iterated_laplacian_coefficient(KernelSpec(d, n), m) != 0.0


def test_nonnegative_even_exponent_annihilates_even_when_admissible():
    # n = 2, d = 3 is admissible (n + d = 5) yet Lap^2 |x|^2 = 0
    spec = KernelSpec(3, 2)
    assert spec.is_admissible
    assert iterated_laplacian_coefficient(spec, 2) == 0.0


@settings(max_examples=50)
@given(st.integers(1, 3), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_symmetry_bitwise(d, n, seed):
    r = np.random.default_rng(seed)
    x, y = r.normal(size=d), r.normal(size=d)
    spec = KernelSpec(d, n)
    assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_laplacian_recursion_by_finite_differences(d):
    assert laplacian_recursion_errors(d, samples=300, seed=d).max() <= 1e-5


def test_fd_laplacian_plain_stencil_agrees_in_easy_regime():
    x, y = np.array([3.0, 0.4]), np.array([0.1, -0.2])
    h = 1e-4
    plain = 0.0
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        f = lambda p: float(np.linalg.norm(p - y)) ** 1.7
        plain += (f(x + e) - 2 * f(x) + f(x - e)) / h**2
    assert fd_laplacian_x(1.7, x, y) == pytest.approx(plain, rel=1e-6)
