"""Simplicial complexes, cochains and the coboundary operator.

Simplices of every degree below the top are stored canonically as sorted
vertex tuples, ordered lexicographically; the orientation of a canonical
simplex is the increasing vertex order.  Top simplices keep the orientation
given by the caller.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from numbers import Rational
from typing import Sequence

import numpy as np


class MeshError(ValueError):
    pass


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction, Rational)) and not isinstance(v, bool)


class SimplicialComplex:
    """A triangulated closed n-manifold.

    ``periods`` (optional, one entry per ambient coordinate or ``None``) makes
    edge vectors use the minimum-image convention, which is how flat tori are
    represented with vertex coordinates in a fundamental box.
    """

    def __init__(self, vertices, simplices, dimension=None, periods=None, check=True):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2:
            raise MeshError("vertices must be a 2-d array of coordinates")
        self.top = [tuple(int(v) for v in s) for s in simplices]
        if not self.top:
            raise MeshError("complex has no simplices")
        self.dimension = len(self.top[0]) - 1 if dimension is None else int(dimension)
        if any(len(s) != self.dimension + 1 for s in self.top):
            raise MeshError("all top simplices must have dimension + 1 vertices")
        self.periods = None if periods is None else [None if p is None else float(p) for p in periods]
        nv = len(self.vertices)
        for s in self.top:
            if len(set(s)) != len(s) or min(s) < 0 or max(s) >= nv:
                raise MeshError(f"invalid top simplex {s}")

        # skeleta: sorted tuples, lexicographic order
        self.skeleta: list[list[tuple[int, ...]]] = [[(v,) for v in range(nv)]]
        for p in range(1, self.dimension + 1):
            faces = set()
            for s in self.top:
                faces.update(combinations(sorted(s), p + 1))
            self.skeleta.append(sorted(faces))
        self._index = [{s: i for i, s in enumerate(sk)} for sk in self.skeleta]
        if len(self.skeleta[self.dimension]) != len(self.top):
            raise MeshError("duplicate top simplices")
        self._coboundary_cache: dict[int, np.ndarray] = {}
        self.orientable = None
        if check:
            self.validate()

    # -- basic accessors --------------------------------------------------
    @property
    def edges(self):
        return self.skeleta[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    def count(self, p: int) -> int:
        return len(self.skeleta[p])

    def index(self, simplex) -> int:
        """Index of a simplex in its canonical skeleton (orientation ignored)."""
        key = tuple(sorted(simplex))
        return self._index[len(key) - 1][key]

    def edge_sign(self, u: int, v: int) -> tuple[int, int]:
        """(edge index, +1/-1) for the oriented edge u -> v."""
        if u < v:
            return self._index[1][(u, v)], 1
        return self._index[1][(v, u)], -1

    def neighbors(self):
        nbrs = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        for lst in nbrs:
            lst.sort()
        return nbrs

    def displacement(self, u: int, v: int) -> np.ndarray:
        d = self.vertices[v] - self.vertices[u]
        if self.periods is not None:
            for a, period in enumerate(self.periods):
                if period is not None:
                    d[a] -= period * math.floor(d[a] / period + 0.5)
        return d

    def edge_matrix(self, simplex) -> np.ndarray:
        """Rows are the edge vectors v_i - v_0 of an oriented simplex."""
        return np.array([self.displacement(simplex[0], v) for v in simplex[1:]])

    # -- validation --------------------------------------------------------
    def validate(self):
        n = self.dimension
        for s in self.top:
            E = self.edge_matrix(s)
            sv = np.linalg.svd(E, compute_uv=False)
            if len(sv) < n or sv[-1] <= 1e-12 * max(1.0, sv[0]):
                raise MeshError(f"degenerate top simplex {s}")
        # every (n-1)-face in exactly two top simplices
        incidence: dict[tuple, list[int]] = {}
        for t, s in enumerate(self.top):
            for face in combinations(sorted(s), n):
                incidence.setdefault(face, []).append(t)
        for face, ts in incidence.items():
            if len(ts) != 2:
                raise MeshError(f"face {face} lies in {len(ts)} top simplices; not a closed manifold")
        self.orientable = self._orientation_consistent(incidence)
        if not self._connected():
            raise MeshError("1-skeleton is not connected")

    def _face_sign(self, simplex, face) -> int:
        # sign of `face` (sorted) in the boundary of the oriented `simplex`
        missing = [v for v in simplex if v not in face][0]
        i = simplex.index(missing)
        rest = [v for v in simplex if v != missing]
        return (-1) ** i * permutation_sign(rest)

    def _orientation_consistent(self, incidence) -> bool:
        for face, (a, b) in incidence.items():
            if self._face_sign(self.top[a], face) != -self._face_sign(self.top[b], face):
                return False
        return True

    def _connected(self) -> bool:
        nbrs = self.neighbors()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n_vertices

    # -- coboundary ----------------------------------------------------------
    def coboundary_matrix(self, p: int) -> np.ndarray:
        """Integer matrix of d_p: C^p -> C^{p+1} (rows: (p+1)-simplices)."""
        if p < 0 or p >= self.dimension:
            raise MeshError(f"no coboundary from degree {p} on a {self.dimension}-complex")
        if p not in self._coboundary_cache:
            rows = self.skeleta[p + 1]
            D = np.zeros((len(rows), len(self.skeleta[p])), dtype=np.int64)
            idx = self._index[p]
            for r, s in enumerate(rows):
                for i in range(len(s)):
                    D[r, idx[s[:i] + s[i + 1:]]] += (-1) ** i
            self._coboundary_cache[p] = D
        return self._coboundary_cache[p]

    def coboundary_rows(self, p: int):
        """Sparse rows of d_p as lists of (column, sign)."""
        idx = self._index[p]
        return [[(idx[s[:i] + s[i + 1:]], (-1) ** i) for i in range(len(s))]
                for s in self.skeleta[p + 1]]

    # -- I/O -----------------------------------------------------------------
    def to_dict(self) -> dict:
        doc = {
            "dimension": self.dimension,
            "vertices": self.vertices.tolist(),
            "simplices": [list(s) for s in self.top],
        }
        if self.periods is not None:
            doc["periods"] = self.periods
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SimplicialComplex":
        try:
            return cls(doc["vertices"], doc["simplices"], doc.get("dimension"), doc.get("periods"))
        except KeyError as exc:
            raise MeshError(f"mesh document is missing {exc}") from None


def permutation_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass
class Cochain:
    """Values on the canonical p-skeleton; exact (int/Fraction) or float."""

    complex: SimplicialComplex = field(repr=False)
    degree: int
    values: list

    def __post_init__(self):
        self.values = list(self.values)
        if len(self.values) != self.complex.count(self.degree):
            raise MeshError(
                f"{self.degree}-cochain needs {self.complex.count(self.degree)} values, "
                f"got {len(self.values)}"
            )

    @property
    def exact(self) -> bool:
        return all(_is_exact(v) for v in self.values)

    def array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def on(self, simplex) -> object:
        """Value on an oriented simplex (negated for odd permutations)."""
        key = tuple(sorted(simplex))
        val = self.values[self.complex._index[self.degree][key]]
        return val if permutation_sign(simplex) == 1 else -val

    def _combine(self, other, fn):
        if other.complex is not self.complex or other.degree != self.degree:
            raise MeshError("cochains live on different spaces")
        return Cochain(self.complex, self.degree, [fn(a, b) for a, b in zip(self.values, other.values)])

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __neg__(self):
        return Cochain(self.complex, self.degree, [-a for a in self.values])

    def __mul__(self, scalar):
        return Cochain(self.complex, self.degree, [scalar * a for a in self.values])

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"degree": self.degree, "values": [_encode_number(v) for v in self.values]}

    @classmethod
    def from_dict(cls, complex, doc) -> "Cochain":
        try:
            return cls(complex, int(doc["degree"]), [_decode_number(v) for v in doc["values"]])
        except KeyError as exc:
            raise MeshError(f"cochain document is missing {exc}") from None


def _encode_number(v):
    if isinstance(v, bool):
        raise TypeError("boolean cochain value")
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return float(v)


def _decode_number(v):
    if isinstance(v, bool):
        raise MeshError("boolean cochain value")
    if isinstance(v, int):
        return v
    if isinstance(v, str):
        return Fraction(v)
    return float(v)


def zero_cochain(complex, degree, exact=True) -> Cochain:
    return Cochain(complex, degree, [0 if exact else 0.0] * complex.count(degree))


def coboundary(c: Cochain) -> Cochain:
    K = c.complex
    if c.degree >= K.dimension:
        raise MeshError(f"degree {c.degree} cochain has no coboundary on a {K.dimension}-complex")
    out = []
    for row in K.coboundary_rows(c.degree):
        total = 0
        for col, sign in row:
            total += sign * c.values[col]
        out.append(total)
    return Cochain(K, c.degree + 1, out)


def verify_closed(c: Cochain, tol: float = 0.0) -> tuple[bool, float]:
    """True iff every value of coboundary(c) is within ``tol`` of zero."""
    if c.degree != 1:
        raise MeshError("verify_closed expects a 1-cochain")
    if c.complex.dimension < 2:
        return True, 0.0
    d = coboundary(c)
    residual = max((abs(v) for v in d.values), default=0)
    return residual <= tol, float(residual)


def edge_components(c: Cochain, simplex) -> np.ndarray:
    """Values c(v0, vi), i = 1..n, on an oriented simplex."""
    v0 = simplex[0]
    out = []
    for v in simplex[1:]:
        e, sign = c.complex.edge_sign(v0, v)
        out.append(sign * float(c.values[e]))
    return np.array(out)


def simplexwise_components(c: Cochain, simplex) -> np.ndarray:
    """Ambient covector whose pairing with each edge vector reproduces ``c``.

    The covector is the minimum-norm solution, i.e. it lies in the tangent
    plane of the simplex.
    """
    if c.degree != 1:
        raise MeshError("components are defined for 1-cochains")
    E = c.complex.edge_matrix(simplex)
    sv = np.linalg.svd(E, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise MeshError(f"degenerate simplex {simplex}")
    return np.linalg.pinv(E) @ edge_components(c, simplex)


@dataclass
class IndependenceReport:
    components: list          # per top simplex, k x d matrix
    ranks: list[int]
    min_singular: float
    tol: float
    passed: bool
    reason: str = ""

    @property
    def failing_simplices(self):
        k = max((c.shape[0] for c in self.components), default=0)
        return [t for t, r in enumerate(self.ranks) if r < k]


def independence_report(forms: Sequence[Cochain], tol: float = 1e-9) -> IndependenceReport:
    if not forms:
        raise MeshError("need at least one form")
    K = forms[0].complex
    k, n = len(forms), K.dimension
    if k > n:
        return IndependenceReport([], [], 0.0, tol, False,
                                  f"{k} forms cannot be pointwise independent in dimension {n}")
    comps, ranks, min_sv = [], [], math.inf
    for s in K.top:
        E = K.edge_matrix(s)
        pinv = np.linalg.pinv(E)
        A = np.array([pinv @ edge_components(f, s) for f in forms])
        sv = np.linalg.svd(A, compute_uv=False)
        comps.append(A)
        ranks.append(int(np.sum(sv > tol)))
        min_sv = min(min_sv, float(sv[k - 1]))
    passed = all(r == k for r in ranks) and min_sv >= tol
    reason = "" if passed else f"rank deficient on {sum(r < k for r in ranks)} simplices"
    return IndependenceReport(comps, ranks, min_sv, tol, passed, reason)


# --- built-in meshes ---------------------------------------------------------

def flat_torus(res: int = 8) -> SimplicialComplex:
    """Unit flat torus, res x res grid, each square split along its diagonal."""
    if res < 3:
        raise MeshError("torus resolution must be at least 3")
    vid = lambda i, j: (i % res) + res * (j % res)
    verts = [(i / res, j / res) for j in range(res) for i in range(res)]
    tris = []
    for j in range(res):
        for i in range(res):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return SimplicialComplex(verts, tris, 2, periods=[1.0, 1.0])


def klein_bottle(res: int = 8) -> SimplicialComplex:
    """Klein bottle [0,1]^2 / (x,0)~(x,1), (0,y)~(1,1-y), embedded in R^4."""
    if res < 4:
        raise MeshError("Klein bottle resolution must be at least 4")

    def vid(i, j):
        if i >= res:
            i, j = i - res, -j
        return i + res * (j % res)

    R, r = 2.0, 1.0
    verts = []
    for j in range(res):
        for i in range(res):
            x, y = i / res, j / res
            rad = R + r * math.cos(2 * math.pi * y)
            verts.append((
                rad * math.cos(2 * math.pi * x),
                rad * math.sin(2 * math.pi * x),
                r * math.sin(2 * math.pi * y) * math.cos(math.pi * x),
                r * math.sin(2 * math.pi * y) * math.sin(math.pi * x),
            ))
    tris = []
    for j in range(res):
        for i in range(res):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return SimplicialComplex(verts, tris, 2)


def octahedron() -> SimplicialComplex:
    verts = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    tris = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4),
            (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]
    return SimplicialComplex(verts, tris, 2)


def coordinate_form(K: SimplicialComplex, axis: int) -> Cochain:
    """Edge displacement along one ambient axis (``dx`` for axis 0)."""
    vals = [float(K.displacement(u, v)[axis]) for u, v in K.edges]
    return Cochain(K, 1, vals)


def exact_coordinate_form(K: SimplicialComplex, axis: int, res: int) -> Cochain:
    """Same as :func:`coordinate_form` but as exact multiples of 1/res."""
    vals = [Fraction(round(float(K.displacement(u, v)[axis]) * res), res) for u, v in K.edges]
    return Cochain(K, 1, vals)


def load_mesh(path) -> SimplicialComplex:
    with open(path) as fh:
        return SimplicialComplex.from_dict(json.load(fh))
