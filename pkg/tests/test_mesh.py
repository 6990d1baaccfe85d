import math
from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from closedforms.mesh import (Cochain, MeshError, SimplicialComplex, coboundary, coordinate_form,
                              exact_coordinate_form, flat_torus, independence_report, klein_bottle,
                              load_mesh, octahedron, permutation_sign, simplexwise_components,
                              verify_closed)

from conftest import data_file

MESHES = {"torus8": flat_torus(8), "klein8": klein_bottle(8), "octahedron": octahedron()}


@pytest.mark.parametrize("name, counts, orientable", [
    ("torus8", (64, 192, 128), True),
    ("klein8", (64, 192, 128), False),
    ("octahedron", (6, 12, 8), True),
])
def test_face_counts_and_euler(name, counts, orientable):
    K = MESHES[name]
    assert tuple(K.count(p) for p in range(3)) == counts
    assert K.orientable is orientable


@pytest.mark.parametrize("name", ["torus8", "klein8", "octahedron"])
def test_bundled_files_match_generators(name):
    K = load_mesh(data_file("meshes", f"{name}.json"))
    assert K.skeleta == MESHES[name].skeleta
    np.testing.assert_array_equal(K.vertices, MESHES[name].vertices)


def test_permutation_sign_matches_inversion_count():
    for p in permutations(range(4)):
        inv = sum(p[i] > p[j] for i in range(4) for j in range(i + 1, 4))
        assert permutation_sign(p) == (-1) ** inv


def test_coboundary_matrix_brute_force():
    K = octahedron()
    D = K.coboundary_matrix(1)
    for r, tri in enumerate(K.skeleta[2]):
        for i in range(3):
            face = tri[:i] + tri[i + 1:]
            assert D[r, K.index(face)] == (-1) ** i


def test_invalid_meshes_rejected():
    with pytest.raises(MeshError):
        SimplicialComplex([[0, 0], [1, 0], [0, 1]], [(0, 1, 2)])           # boundary edges
    with pytest.raises(MeshError):
        SimplicialComplex([[0, 0], [1, 0]], [(0, 1, 5)])
    K = octahedron()
    with pytest.raises(MeshError):
        Cochain(K, 1, [0] * 5)


def test_cochain_serialisation_round_trip():
    K = flat_torus(4)
    c = exact_coordinate_form(K, 0, 4) + Cochain(K, 1, [Fraction(i, 7) for i in range(K.count(1))])
    back = Cochain.from_dict(K, c.to_dict())
    assert back.values == c.values and back.exact


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(MESHES)), st.integers(0, 2**32 - 1))
def test_dd_is_zero_exactly(name, seed):
    K = MESHES[name]
    rng = np.random.default_rng(seed)
    f = Cochain(K, 0, [int(v) for v in rng.integers(-10**6, 10**6, K.n_vertices)])
    dd = coboundary(coboundary(f))
    assert dd.exact and all(v == 0 for v in dd.values)


@settings(max_examples=20, deadline=None)
@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(0, 2**32 - 1))
def test_coboundary_linear(a, b, seed):
    K = octahedron()
    rng = np.random.default_rng(seed)
    f = Cochain(K, 1, [int(v) for v in rng.integers(-9, 9, 12)])
    g = Cochain(K, 1, [int(v) for v in rng.integers(-9, 9, 12)])
    assert coboundary(a * f + b * g).values == (a * coboundary(f) + b * coboundary(g)).values


def test_coordinate_forms_closed_and_components():
    K = flat_torus(8)
    for axis in range(2):
        form = coordinate_form(K, axis)
        assert verify_closed(form, 1e-12)[0]
        for s in K.top[:10]:
            np.testing.assert_allclose(simplexwise_components(form, s), np.eye(2)[axis], atol=1e-12)


@pytest.mark.parametrize("a, b", [(0.3, 1.0), (2.0, -0.5), (1.0, 1e-3)])
def test_independence_min_singular_closed_form(a, b):
    """Cartesian components are [[1, 0], [a, b]] on every triangle."""
    K = flat_torus(8)
    dx, dy = coordinate_form(K, 0), coordinate_form(K, 1)
    rep = independence_report([dx, a * dx + b * dy])
    T, D = 1 + a * a + b * b, abs(b)
    smin = math.sqrt((T - math.sqrt(T * T - 4 * D * D)) / 2)
    assert rep.passed and rep.ranks == [2] * 128
    assert rep.min_singular == pytest.approx(smin, rel=1e-9)


def test_independence_fails_for_parallel_forms():
    K = flat_torus(8)
    dx = coordinate_form(K, 0)
    rep = independence_report([dx, 2 * dx])
    assert not rep.passed and rep.failing_simplices == list(range(128))
    assert not independence_report([dx, dx, dx]).passed


def test_orientation_flip_preserves_ranks():
    K = flat_torus(6)
    flipped = SimplicialComplex(K.vertices, [s[::-1] if t % 3 == 0 else s for t, s in enumerate(K.top)],
                                periods=K.periods)
    forms = [coordinate_form(K, 0), coordinate_form(K, 1)]
    forms_f = [Cochain(flipped, 1, f.values) for f in forms]
    assert independence_report(forms).ranks == independence_report(forms_f).ranks
    for s, sf in zip(K.top, flipped.top):
        for f, ff in zip(forms, forms_f):
            np.testing.assert_allclose(simplexwise_components(f, s), simplexwise_components(ff, sf), atol=1e-12)
