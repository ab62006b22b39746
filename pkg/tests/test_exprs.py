import numpy as np
import pytest

from isaacs_vex.errors import ValidationError
from isaacs_vex.exprs import compile_expr, variable_names


NAMES = variable_names(d=2, du=1, dv=1)


def test_basic_arithmetic():
    e = compile_expr("2 * x1 + x2 / 4 - 1", NAMES)
    assert e({"x1": 3.0, "x2": 8.0}) == pytest.approx(7.0)


def test_power_and_unary():
    e = compile_expr("-x1 ** 2 + (+x2)", NAMES)
    assert e({"x1": 3.0, "x2": 1.0}) == pytest.approx(-8.0)


def test_functions():
    e = compile_expr("sin(x1) + cos(x2) + exp(0) + abs(-2)", NAMES)
    assert e({"x1": 0.0, "x2": 0.0}) == pytest.approx(0.0 + 1.0 + 1.0 + 2.0)


def test_min_max_variadic():
    e = compile_expr("min(x1, x2, 0) + max(x1, x2)", NAMES)
    assert e({"x1": -1.0, "x2": 2.0}) == pytest.approx(-1.0 + 2.0)


def test_clamp():
    e = compile_expr("clamp(x1, -1, 1)", NAMES)
    xs = np.array([-3.0, 0.5, 7.0])
    np.testing.assert_allclose(e({"x1": xs}), [-1.0, 0.5, 1.0])


def test_broadcasting():
    e = compile_expr("x1 * u1 + t", NAMES)
    out = e({"x1": np.array([[1.0], [2.0]]), "u1": np.array([3.0, 4.0]), "t": 1.0})
    np.testing.assert_allclose(out, [[4.0, 5.0], [7.0, 9.0]])


def test_used_names_tracked():
    e = compile_expr("sin(x1) + u1", NAMES)
    assert e.names == frozenset({"x1", "u1"})


@pytest.mark.parametrize(
    "src",
    [
        "x3 + 1",  # unknown variable
        "tan(x1)",  # unknown function
        "x1 @ x2",  # disallowed operator
        "lambda: 1",  # not an expression
        "x1; x2",  # statement
        "'abc'",  # non-numeric literal
        "min(x1)",  # too few args
        "clamp(x1, 0)",  # wrong arity
        "f(x1)(x2)",  # nested call of non-name
    ],
)
def test_rejects_bad_expressions(src):
    with pytest.raises(ValidationError):
        compile_expr(src, NAMES)


def test_rejects_non_string():
    with pytest.raises(ValidationError):
        compile_expr(3.14, NAMES)
