import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halfline_bvp.expr import (ArityError, ExprSyntaxError, NonFiniteError,
                               UnknownIdentifierError, evaluate, parse, F_VARS)


def test_precedence_and_power_associativity():
    assert parse("1 + 2*3")() == 7
    assert parse("2^3^2")() == 512
    assert parse("-2^2")() == -4
    assert parse("(1 - 2) - 3")() == -4


def test_functions_and_constants():
    e = parse("sin(pi/2) + exp(0) + max(1, 2) + abs(-3)")
    assert e() == pytest.approx(7.0)
    assert parse("e")() == pytest.approx(math.e)


def test_variables_are_checked():
    e = parse("t*x + y", F_VARS)
    assert e.variables == frozenset("txy")
    assert e(t=2, x=3, y=1) == 7
    with pytest.raises(UnknownIdentifierError):
        parse("z + 1", F_VARS)


def test_vectorised_evaluation():
    e = parse("(2 + sin(t))/1000", {"t"})
    t = np.linspace(0, 3, 7)
    np.testing.assert_allclose(e(t=t), (2 + np.sin(t)) / 1000)


@pytest.mark.parametrize("src", ["", "1 +", "(1", "1 2", "sin 1", "3 $ 4"])
def test_syntax_errors(src):
    with pytest.raises(ExprSyntaxError):
        parse(src)


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as info:
        parse("1 + * 2")
    assert info.value.position == 4


def test_arity():
    with pytest.raises(ArityError):
        parse("sin(1, 2)")
    with pytest.raises(ArityError):
        parse("max(1)")


@pytest.mark.parametrize("src", ["1/0", "log(0)", "sqrt(-1)", "(-8)^(1/3)", "exp(1000)"])
def test_non_finite_is_reported(src):
    with pytest.raises(NonFiniteError):
        parse(src)()


def test_source_round_trip():
    e = parse("-(t + 1)*exp(-t) + t^2/(1 + t)", {"t"})
    again = parse(e.source(), {"t"})
    for t in (0.0, 0.5, 3.0):
        assert again(t=t) == e(t=t)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_matches_python_arithmetic(a, b):
    e = parse("x*y - (x + y)/2", {"x", "y"})
    assert evaluate(e, {"x": a, "y": b}) == pytest.approx(a * b - (a + b) / 2, rel=1e-12, abs=1e-12)


@given(st.integers(-6, 6), st.integers(0, 4))
def test_integer_powers_of_negative_base(b, n):
    assert parse(f"({b})^{n}")() == pytest.approx(float(b) ** n)
