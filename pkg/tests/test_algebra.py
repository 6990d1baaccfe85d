"""Exact linear algebra and continued fractions against sympy."""
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from closedforms.exact import Echelon, determinant, exact_rank, inverse, solve_square
from closedforms.rational import approximate, cf_terms, convergents, lcm_denominators

small_ints = st.integers(-3, 3)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_rank_and_nullspace_match_sympy(m, n, data):
    A = data.draw(st.lists(st.lists(small_ints, min_size=n, max_size=n), min_size=m, max_size=m))
    rows = [{j: v for j, v in enumerate(r) if v} for r in A]
    M = sp.Matrix(A)
    assert exact_rank(rows, n) == M.rank()
    ech = Echelon(n)
    for r in rows:
        ech.add(r)
    null = ech.nullspace()
    assert len(null) == n - M.rank()
    for x in null:
        assert all(v == 0 for v in M * sp.Matrix([sp.Rational(f.numerator, f.denominator) for f in x]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.data())
def test_determinant_inverse_solve(n, data):
    A = data.draw(st.lists(st.lists(small_ints, min_size=n, max_size=n), min_size=n, max_size=n))
    M = sp.Matrix(A)
    assert determinant(A) == M.det()
    if M.det() != 0:
        inv = inverse(A)
        ref = M.inv()
        assert all(Fraction(int(ref[i, j].p), int(ref[i, j].q)) == inv[i][j] for i in range(n) for j in range(n))
        b = list(range(1, n + 1))
        x = solve_square(A, b)
        assert all(sum(A[i][j] * x[j] for j in range(n)) == b[i] for i in range(n))


@pytest.mark.parametrize("x", [0.3, math.pi, math.sqrt(2), Fraction(355, 113), -2.75, 1e-7])
def test_cf_terms_match_sympy(x):
    ref = sp.continued_fraction(sp.Rational(Fraction(x).numerator, Fraction(x).denominator))
    assert list(cf_terms(x, 200)) == [int(a) for a in ref]


def test_convergents_of_pi():
    assert list(convergents(math.pi, 4)) == [3, Fraction(22, 7), Fraction(333, 106), Fraction(355, 113)]


@settings(max_examples=200)
@given(st.floats(-50, 50, allow_nan=False), st.sampled_from([1e-2, 1e-4, 1e-6, 1e-9]))
def test_approximate_is_first_good_convergent(x, eps):
    q = approximate(x, eps)
    assert abs(q - Fraction(x)) <= eps
    # every earlier convergent misses the tolerance
    for c in convergents(x):
        if c == q:
            break
        assert abs(c - Fraction(x)) > eps
    # and nothing with a smaller denominator is closer than q's own class allows:
    # limit_denominator gives the best approximation with denominator <= q's
    best = Fraction(x).limit_denominator(q.denominator)
    assert abs(best - Fraction(x)) <= abs(q - Fraction(x))


def test_lcm_denominators():
    assert lcm_denominators([Fraction(1, 4), Fraction(5, 6), 3]) == 12
    assert lcm_denominators([Fraction(3, 10), 1]) == 10
    row = [Fraction(1, d) for d in range(1, 11)]
    assert lcm_denominators(row) == math.lcm(*range(1, 11))
