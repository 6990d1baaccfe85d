import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from closedforms.torus import (FlowError, LatticeSearch, ProjectionError, commutation_residual,
                               conservation_residual, dual_coframe, flow, joint_flow, period_lattice,
                               project_to_level)

from conftest import bundled_system

OSC = bundled_system("oscillator")
SO3 = bundled_system("so3")


def _rotate(q, p, t):
    return q * math.cos(t) + p * math.sin(t), -q * math.sin(t) + p * math.cos(t)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 7))
def test_oscillator_flow_is_rotation(q1, q2, p1, p2, t):
    y = flow(OSC, 0, t, [q1, q2, p1, p2])
    a, b = _rotate(q1, p1, t)
    np.testing.assert_allclose(y, [a, q2, b, p2], atol=1e-9)


def test_so3_flow_of_z_rotates_xy():
    x = np.array([1.0, 0.0, 2.0])
    for t in (0.5, math.pi, 2 * math.pi):
        y = flow(SO3, 0, t, x)
        # X_z = (x2, -x1, 0)
        np.testing.assert_allclose(y, [math.cos(t), -math.sin(t), 2.0], atol=1e-9)


def test_flow_zero_time_and_box_exit():
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(flow(OSC, 0, 0.0, x), x) and flow(OSC, 0, 0.0, x) is not x
    with pytest.raises(FlowError):
        flow(OSC, 0, 1.0, [1.9, 0, 1.9, 0])   # radius 2.69 leaves the [-2, 2] box


def test_joint_flow_order_and_commutation():
    x = np.array([0.7, -0.3, 0.2, 0.5])
    y = joint_flow(OSC, [0, 1], [0.4, 1.1], x)
    a, b = _rotate(0.7, 0.2, 0.4)
    c, d = _rotate(-0.3, 0.5, 1.1)
    np.testing.assert_allclose(y, [a, c, b, d], atol=1e-9)
    assert commutation_residual(OSC, 0, 1, x, 0.8, 0.3) < 1e-9


def test_conservation():
    x = np.array([0.7, -0.3, 0.2, 0.5])
    assert conservation_residual(OSC, x, [0, 1], 3.0) < 1e-9


def test_projection_reaches_level():
    s = project_to_level(OSC, [0.5, 0.5], [1.1, 0, 0.9, 0])
    np.testing.assert_allclose(OSC.values(s.point), [0.5, 0.5], atol=1e-10)
    assert s.jacobian_rank == 2


def test_projection_on_singular_level_raises():
    with pytest.raises(ProjectionError, match="not regular"):
        project_to_level(OSC, [0.0, 0.5], [0.3, 0.8, 0.1, 0.2])


def test_coframe_pairing():
    s = project_to_level(OSC, [0.5, 0.5], [1.1, 0, 0.9, 0])
    cf = dual_coframe(OSC, s)
    assert cf.pairing_residual < 1e-12
    np.testing.assert_allclose(cf.covectors @ cf.fields, np.eye(2), atol=1e-12)


def test_so3_orbit_period():
    s = project_to_level(SO3, [2.0, 5.0], [1.0, 0.0, 2.0])
    L = period_lattice(SO3, s, LatticeSearch(t_max=10.0))
    assert L.verdict == "torus T^1"
    assert abs(L.basis[0][0] - 2 * math.pi) < 1e-6


def test_short_window_is_inconclusive():
    s = project_to_level(SO3, [2.0, 5.0], [1.0, 0.0, 2.0])
    L = period_lattice(SO3, s, LatticeSearch(t_max=3.0))
    assert L.verdict.startswith("inconclusive")
