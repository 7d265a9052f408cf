import math

import numpy as np
import pytest
import sympy

from rieszfit.expressions import ExpressionError, TargetSpec, parse_expression


@pytest.mark.parametrize("text,point,expected", [
    ("y1^2", [0.5], 0.25),
    ("y1**2", [-0.5], 0.25),
    ("2*y1 - 3/4", [1.0], 1.25),
    ("-y1^2", [3.0], -9.0),
    ("2^3^2", [0.0], 512.0),
    ("sin(pi*y1)", [0.5], 1.0),
    ("exp(cos(0))", [0.0], math.e ** math.cos(0)),
    ("|y|^2 + 1e-3", [0.3], 0.091),
    ("(y1 + 1)*(y1 - 1)", [2.0], 3.0),
    ("1.5e1 + .5", [0.0], 15.5),
])
def test_grammar_values(text, point, expected):
    assert TargetSpec(text, 1).evaluate([point])[0] == pytest.approx(expected, rel=1e-14)


def test_norm_in_two_dimensions():
    t = TargetSpec("|y|**2 - y2", 2)
    assert t.evaluate([[3.0, 4.0]])[0] == 21.0


def test_numbers_are_exact_rationals():
    assert parse_expression("0.1", 1) == sympy.Rational(1, 10)


def test_derivatives_are_exact():
    t = TargetSpec("sin(pi*y1) * y2^3", 2)
    pts = np.array([[0.3, -0.7], [0.1, 0.2]])
    d12 = t.evaluate(pts, (1, 2))
    expected = math.pi * np.cos(math.pi * pts[:, 0]) * 6 * pts[:, 1]
    assert np.allclose(d12, expected, rtol=1e-14)


def test_constant_target_broadcasts():
    assert np.array_equal(TargetSpec("3", 2).evaluate(np.zeros((4, 2))), np.full(4, 3.0))
    assert np.array_equal(TargetSpec("y1", 1).evaluate(np.zeros((3, 1)), (2,)), np.zeros(3))


@pytest.mark.parametrize("text,token", [
    ("y1 + $", "$"),
    ("y3", "y3"),
    ("sin y1", "y1"),
    ("(y1 + 1", "<end>"),
    ("y1 + * 2", "*"),
    ("tan(y1)", "tan"),
    ("y1 2", "2"),
])
def test_errors_name_the_token(text, token):
    with pytest.raises(ExpressionError) as info:
        TargetSpec(text, 2 if text == "y3" else 1)
    assert info.value.token == token
    assert repr(token) in str(info.value)
