import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from closedforms.expr import (BinOp, Call, ExpressionDomainError, ExpressionSyntaxError, Function, Neg,
                              Num, Pow, Var, eval_with_derivatives, parse_expression, to_text)

from conftest import catalog


def test_power_rule():
    v, g = eval_with_derivatives("x1^2", [3.0])
    assert v == 9.0 and g.tolist() == [6.0]


def test_product_rule_at_zero():
    v, g = eval_with_derivatives("sin(x1)*x2", [0.0, 5.0])
    assert v == 0.0 and g.tolist() == [5.0, 0.0]


def test_precedence_and_unary_minus():
    assert parse_expression("1 + 2*x1^2") == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Pow(Var(0), 2)))
    # unary minus lives inside the atom, so it is raised to the power too
    assert parse_expression("-x1^2") == Pow(Neg(Var(0)), 2)
    assert eval_with_derivatives("-x1^2", [3.0])[0] == 9.0
    assert eval_with_derivatives("-(x1^2)", [3.0])[0] == -9.0


def test_left_associative_division():
    assert eval_with_derivatives("8/2/2", [0.0])[0] == 2.0


@pytest.mark.parametrize("text, offset", [("x1 +", 4), ("x1 * (x2", 8), ("foo(x1)", 0),
                                          ("x1^1.5", 3), ("x1 $ 2", 3), ("x0", 0)])
def test_syntax_errors_carry_offsets(text, offset):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression(text)
    assert info.value.offset == offset


def test_variable_beyond_dimension():
    with pytest.raises(ValueError):
        Function("x3", 2)


@pytest.mark.parametrize("text, x", [("1/x1", [0.0]), ("sqrt(x1)", [-1.0]), ("sqrt(x1)", [0.0]),
                                     ("x1^-1", [0.0])])
def test_domain_errors(text, x):
    with pytest.raises(ExpressionDomainError):
        eval_with_derivatives(text, x)


@pytest.mark.parametrize("text", catalog()["expressions"])
def test_round_trip(text):
    tree = parse_expression(text)
    assert parse_expression(to_text(tree)) == tree


@pytest.mark.parametrize("text", catalog()["expressions"])
def test_gradient_matches_sympy(text):
    cat = catalog()
    n = cat["dimension"]
    xs = sp.symbols(f"x1:{n + 1}")
    # sympy reads '^' as xor; the grammar's unary minus also differs, so
    # translate through our own fully parenthesised printer
    expr = sp.sympify(to_text(parse_expression(text)).replace("^", "**"), locals=dict(zip(map(str, xs), xs)))
    rng = np.random.default_rng(7)
    lo, hi = np.array(cat["box"]).T
    for x in lo + (hi - lo) * rng.random((5, n)):
        sub = dict(zip(xs, x))
        v, g = eval_with_derivatives(text, x)
        assert v == pytest.approx(float(expr.subs(sub)), rel=1e-12, abs=1e-12)
        ref = [float(sp.diff(expr, s).subs(sub)) for s in xs]
        np.testing.assert_allclose(g, ref, rtol=1e-11, atol=1e-12)


# --- property-based -----------------------------------------------------------

def _trees(depth):
    leaf = st.one_of(st.builds(Num, st.floats(0.1, 9.0).map(lambda v: round(v, 3))),
                     st.builds(Var, st.integers(0, 2)))
    if depth == 0:
        return leaf
    sub = _trees(depth - 1)
    return st.one_of(
        leaf,
        st.builds(Neg, sub),
        st.builds(BinOp, st.sampled_from("+-*"), sub, sub),
        st.builds(Pow, sub, st.integers(0, 3)),
        st.builds(Call, st.sampled_from(["sin", "cos"]), sub),
    )


@settings(max_examples=200, deadline=None)
@given(_trees(3))
def test_printer_round_trip_property(tree):
    assert parse_expression(to_text(tree)) == tree


@settings(max_examples=100, deadline=None)
@given(_trees(3), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_gradient_matches_central_differences_property(tree, x):
    f = Function(tree, 3)
    x = np.array(x)
    _, g = f.value_and_grad(x)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (f(x + e) - f(x - e)) / (2 * h)
        assert math.isclose(g[i], fd, rel_tol=1e-4, abs_tol=1e-4 * (1 + abs(f(x))))


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_leibniz_rule(a, b):
    x = [a, b]
    vf, gf = eval_with_derivatives("sin(x1) + x2", x)
    vg, gg = eval_with_derivatives("x1*x2^2", x)
    _, gfg = eval_with_derivatives("(sin(x1) + x2)*(x1*x2^2)", x)
    np.testing.assert_allclose(gfg, vf * gg + vg * gf, atol=1e-12)
