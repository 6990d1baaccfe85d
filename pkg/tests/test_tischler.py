import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from closedforms import cohomology as coh
from closedforms.mesh import coordinate_form, exact_coordinate_form, flat_torus
from closedforms.tischler import (TischlerError, build_fibration_map, covering_report, edge_compatibility,
                                  integerize, pullback_periods, rationalize, verify_fibration, wrap)

RES = 12
K = flat_torus(RES)
BASIS = coh.h1_basis(K, preferred=coh.torus_loops(K, RES))


def test_wrap_range():
    x = np.array([-1.5, -0.5, 0.0, 0.5, 0.75, 2.25])
    w = wrap(x)
    assert np.all(w > -0.5) and np.all(w <= 0.5)
    np.testing.assert_allclose(np.mod(w - x, 1.0) % 1.0, 0.0, atol=1e-15)


def test_identity_map_is_vertex_coordinates():
    theta = build_fibration_map([[1, 0], [0, 1]], BASIS)
    np.testing.assert_allclose(theta.values, K.vertices, atol=1e-15)
    cert = verify_fibration(theta)
    assert cert.verdict == "covering" and cert.degree == 1 and cert.coverage == 1.0
    rep = covering_report(cert)
    assert rep["theta_is_diffeomorphism"] and rep["manifold_is_torus"]


nonsingular = st.tuples(*[st.integers(-2, 2)] * 4).filter(lambda t: t[0] * t[3] - t[1] * t[2] != 0)


@settings(max_examples=12, deadline=None)
@given(nonsingular)
def test_covering_degree_is_abs_det(t):
    k = [[t[0], t[1]], [t[2], t[3]]]
    theta = build_fibration_map(k, BASIS)
    assert edge_compatibility(theta)[0]
    assert pullback_periods(theta, BASIS.selected) == k
    cert = verify_fibration(theta, bins=8)
    assert cert.verdict == "covering"
    assert cert.degree == abs(t[0] * t[3] - t[1] * t[2])
    assert len(cert.regular_values) >= 50


@pytest.mark.parametrize("a, b", [(1, 0), (0, 1), (2, 0), (2, 2), (1, 2), (-3, 0)])
def test_circle_map_fiber_components_are_gcd(a, b):
    theta = build_fibration_map([[a, b]], BASIS)
    cert = verify_fibration(theta, bins=16)
    assert cert.verdict == "fibration" and cert.coverage == 1.0
    assert set(cert.fiber_counts) == {math.gcd(a, b)}


def test_degenerate_map_is_rejected():
    theta = build_fibration_map([[1, 0], [2, 0]], BASIS)
    cert = verify_fibration(theta, bins=8)
    assert cert.verdict == "fail" and len(cert.offending) == len(K.top)


def test_coarse_mesh_refuses_large_increments():
    theta = build_fibration_map([[6, 1], [0, 1]], BASIS)     # 7/12 per diagonal edge
    with pytest.raises(TischlerError):
        verify_fibration(theta)


def test_non_integer_coefficients_rejected():
    with pytest.raises(TischlerError):
        build_fibration_map([[Fraction(1, 2), 0]], BASIS)


def test_rationalize_rational_input_is_untouched():
    dec = coh.decompose_all([coordinate_form(K, 0) + 0.25 * coordinate_form(K, 1), coordinate_form(K, 1)], BASIS)
    tc = rationalize(dec, BASIS)
    assert tc.q == [[1, Fraction(1, 4)], [0, 1]]
    assert tc.N == [4, 1] and tc.k == [[4, 1], [0, 1]] and tc.eps == 0.0


def test_rationalize_irrational_coefficient():
    dec = coh.decompose_all([coordinate_form(K, 0) + math.sqrt(2) * coordinate_form(K, 1)], BASIS)
    tc = rationalize(dec, BASIS, eps0=1e-3)
    q = tc.q[0][1]
    assert abs(q - Fraction(math.sqrt(2))) <= 1e-3
    assert q == Fraction(41, 29)            # first convergent of sqrt 2 within 1e-3
    assert tc.N == [29] and tc.k == [[29, 41]]


def test_integerize():
    N, k = integerize([[Fraction(1, 3), Fraction(1, 2)], [2, Fraction(-3, 4)]])
    assert N == [6, 4] and k == [[2, 3], [8, -3]]


def test_potential_shifts_do_not_change_periods():
    rng = np.random.default_rng(3)
    X = K.vertices
    H = [0.02 * np.sin(2 * np.pi * (X[:, 0] + 2 * X[:, 1]) + rng.random()) for _ in range(2)]
    theta = build_fibration_map([[1, 1], [0, 1]], BASIS, H)
    assert edge_compatibility(theta)[0]
    assert pullback_periods(theta, BASIS.selected) == [[1, 1], [0, 1]]
    assert verify_fibration(theta, bins=8).degree == 1
