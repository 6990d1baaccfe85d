"""First cohomology of a closed triangulated manifold.

A closed 1-cochain that vanishes on a spanning tree is determined by its
values on the chords, and its period over the fundamental cycle of a chord
is exactly that value.  Everything here is built on that gauge.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exact import Echelon, exact_rank, inverse
from .mesh import Cochain, MeshError, SimplicialComplex, _is_exact, verify_closed


class CohomologyError(ValueError):
    pass


Chain = dict  # edge index -> integer coefficient


@dataclass
class CycleBasis:
    root: int
    parent: list[int]          # parent[root] == -1
    order: list[int]           # BFS order, root first
    tree_edges: set[int]
    chords: list[int]          # non-tree edge indices, ascending
    fundamental: list[Chain]   # one per chord, same order
    selected: list[Chain] = field(default_factory=list)
    selected_chords: list[int] = field(default_factory=list)
    kernel: list = field(default_factory=list, repr=False)  # closed chord-supported cochains

    @property
    def n_fundamental(self) -> int:
        return len(self.fundamental)


def spanning_tree(K: SimplicialComplex, root: int = 0):
    nbrs = K.neighbors()
    parent = [-2] * K.n_vertices
    parent[root] = -1
    order = [root]
    queue = deque([root])
    tree = set()
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if parent[v] == -2:
                parent[v] = u
                order.append(v)
                tree.add(K.edge_sign(u, v)[0])
                queue.append(v)
    if len(order) != K.n_vertices:
        raise CohomologyError("1-skeleton is disconnected")
    return parent, order, tree


def _path_to_root(K, parent, v):
    """Chain of the tree path v -> root."""
    chain = {}
    while parent[v] != -1:
        e, s = K.edge_sign(v, parent[v])
        chain[e] = chain.get(e, 0) + s
        v = parent[v]
    return chain


def _add_chain(a: Chain, b: Chain, scale=1) -> Chain:
    out = dict(a)
    for e, c in b.items():
        w = out.get(e, 0) + scale * c
        if w:
            out[e] = w
        else:
            out.pop(e, None)
    return out


def fundamental_cycle(K, parent, chord: int) -> Chain:
    u, v = K.edges[chord]
    # u -> v along the chord, then v -> root -> u along the tree
    chain = {chord: 1}
    chain = _add_chain(chain, _path_to_root(K, parent, v))
    chain = _add_chain(chain, _path_to_root(K, parent, u), -1)
    return chain


def _chord_kernel(K: SimplicialComplex, chords: list[int]):
    """Exact basis of closed cochains supported on chords (tree gauge)."""
    col = {e: i for i, e in enumerate(chords)}
    ech = Echelon(len(chords))
    if K.dimension >= 2:
        for row in K.coboundary_rows(1):
            r = {col[e]: s for e, s in row if e in col}
            if r:
                ech.add(r)
    return ech.nullspace()


def cycle_basis(K: SimplicialComplex, root: int = 0, preferred: Sequence[Chain] = ()) -> CycleBasis:
    """Spanning tree, fundamental cycles and a homology-independent selection.

    ``preferred`` cycles (integer chains) are tried before the fundamental
    ones, which are otherwise taken shortest first.
    """
    parent, order, tree = spanning_tree(K, root)
    chords = [e for e in range(K.count(1)) if e not in tree]
    cycles = [fundamental_cycle(K, parent, e) for e in chords]
    cb = CycleBasis(root, parent, order, tree, chords, cycles)
    kernel = _chord_kernel(K, chords)
    cb.kernel = kernel
    cb.selected, cb.selected_chords = _select_cycles(cb, kernel, preferred)
    return cb


def _chain_periods(kernel, chord_pos, chain):
    # periods of every kernel vector over an arbitrary chain
    return [sum((vec[chord_pos[e]] * c for e, c in chain.items() if e in chord_pos), Fraction(0))
            for vec in kernel]


def _select_cycles(cb, kernel, preferred):
    p = len(kernel)
    chord_pos = {e: i for i, e in enumerate(cb.chords)}
    ech = Echelon(p)
    selected, sel_chords = [], []
    candidates = [(chain, None) for chain in preferred]
    ranked = sorted(range(len(cb.chords)), key=lambda i: (len(cb.fundamental[i]), i))
    candidates += [(cb.fundamental[i], cb.chords[i]) for i in ranked]
    for chain, chord in candidates:
        if len(selected) == p:
            break
        row = _chain_periods(kernel, chord_pos, chain)
        if ech.add(dict(enumerate(row))):
            selected.append(dict(chain))
            sel_chords.append(chord)
    if len(selected) != p:
        raise CohomologyError("homology selection did not reach full rank")
    return selected, sel_chords


@dataclass
class CohomologyBasis:
    complex: SimplicialComplex = field(repr=False)
    betti: int
    cochains: list[Cochain]
    cycles: CycleBasis = field(repr=False)
    period_matrix: list[list[Fraction]]

    @property
    def selected(self):
        return self.cycles.selected


def betti_number(K: SimplicialComplex) -> int:
    """dim ker d1 - rank d0, exact over the rationals."""
    r0 = exact_rank([dict(r) for r in K.coboundary_rows(0)], K.count(0))
    r1 = exact_rank([dict(r) for r in K.coboundary_rows(1)], K.count(1)) if K.dimension >= 2 else 0
    return (K.count(1) - r1) - r0


def integral_dual_basis(rows: list[list[Fraction]]):
    """Given period rows (one per cycle) of a rational basis, return an
    integral normalised basis.

    Returns ``(combos, T)`` where ``combos[j]`` maps row index -> integer
    coefficient (the j-th selected cycle as a combination of the input
    cycles) and ``T`` is the p x p matrix with ``rows @ T`` integer and
    identity on the selected combinations.
    """
    p = len(rows[0]) if rows else 0
    if p == 0:
        return [], []
    denom = 1
    for r in rows:
        for v in r:
            denom = denom * Fraction(v).denominator // math.gcd(denom, Fraction(v).denominator)
    pool = [([int(Fraction(v) * denom) for v in r], {i: 1}) for i, r in enumerate(rows) if any(r)]
    basis = []
    for j in range(p):
        active = [item for item in pool if item[0][j] != 0]
        rest = [item for item in pool if item[0][j] == 0]
        while len(active) > 1:
            active.sort(key=lambda it: (abs(it[0][j]), sum(abs(x) for x in it[0])))
            pv, pc = active[0]
            nxt = [active[0]]
            for vec, combo in active[1:]:
                q = vec[j] // pv[j]
                vec = [a - q * b for a, b in zip(vec, pv)]
                combo = _add_chain(combo, pc, -q)
                if vec[j] != 0:
                    nxt.append((vec, combo))
                elif any(vec):
                    rest.append((vec, combo))
            active = nxt
        if not active:
            raise CohomologyError("period rows do not have full rank")
        basis.append(active[0])
        pool = rest
    # B: rows are lattice basis vectors (scaled back), T = B^{-1}
    B = [[Fraction(v, denom) for v in vec] for vec, _ in basis]
    return [combo for _, combo in basis], inverse(B)


def _harmonic_shift(K: SimplicialComplex, values: list[Fraction], root: int) -> list[Fraction]:
    """Rational vertex function f making ``values - d f`` close to harmonic."""
    nv, ne = K.n_vertices, K.count(1)
    rows, cols, data = [], [], []
    for e, (u, v) in enumerate(K.edges):
        rows += [e, e]
        cols += [u, v]
        data += [-1.0, 1.0]
    D0 = sp.csr_matrix((data, (rows, cols)), shape=(ne, nv))
    L = (D0.T @ D0).tolil()
    rhs = D0.T @ np.array([float(x) for x in values])
    # pin the root
    L[root, :] = 0
    L[root, root] = 1.0
    rhs[root] = 0.0
    f = spla.spsolve(L.tocsc(), rhs)
    return [Fraction(float(x)).limit_denominator(10**6) for x in f]


def h1_basis(K: SimplicialComplex, root: int = 0, preferred: Sequence[Chain] = (),
             cycles: CycleBasis | None = None) -> CohomologyBasis:
    """Closed cochains with integer periods, identity period matrix over the
    selected cycles.  Representatives are exact rationals close to harmonic.
    """
    cb = cycles if cycles is not None else cycle_basis(K, root, preferred)
    kernel = cb.kernel
    p = len(kernel)
    betti = betti_number(K)
    if betti != p:
        raise CohomologyError(f"rank computation ({betti}) disagrees with gauge kernel ({p})")
    if p == 0:
        return CohomologyBasis(K, 0, [], cb, [])
    chord_pos = {e: i for i, e in enumerate(cb.chords)}
    # periods of the kernel basis over the selected cycles, then normalise
    S = [_chain_periods(kernel, chord_pos, ch) for ch in cb.selected]
    T = inverse(S)
    chord_rows = [[sum((kernel[a][i] * T[a][b] for a in range(p)), Fraction(0)) for b in range(p)]
                  for i in range(len(cb.chords))]
    if any(v.denominator != 1 for row in chord_rows for v in row):
        # selected cycles do not generate integral homology: rebuild them
        combos, T2 = integral_dual_basis(chord_rows)
        cb.selected = [
            _combine_chains([(cb.fundamental[i], c) for i, c in combo.items()]) for combo in combos
        ]
        cb.selected_chords = [None] * p
        chord_rows = [[sum((row[a] * T2[a][b] for a in range(p)), Fraction(0)) for b in range(p)]
                      for row in chord_rows]
    cochains = []
    for j in range(p):
        vals = [Fraction(0)] * K.count(1)
        for i, e in enumerate(cb.chords):
            vals[e] = chord_rows[i][j]
        shift = _harmonic_shift(K, vals, cb.root)
        for e, (u, v) in enumerate(K.edges):
            vals[e] -= shift[v] - shift[u]
        cochains.append(Cochain(K, 1, vals))
    P = [[period(nu, ch) for ch in cb.selected] for nu in cochains]
    for i in range(p):
        for j in range(p):
            if P[i][j] != (1 if i == j else 0):
                raise CohomologyError("normalised basis does not have identity periods")
    return CohomologyBasis(K, p, cochains, cb, P)


def _combine_chains(items):
    out = {}
    for chain, c in items:
        out = _add_chain(out, chain, c)
    return out


def period(c: Cochain, chain: Chain):
    return sum((coef * c.values[e] for e, coef in chain.items()), 0)


def periods(c: Cochain, cycles: Sequence[Chain], tol: float = 1e-9) -> list:
    closed, residual = verify_closed(c, 0 if c.exact else tol)
    if not closed:
        raise CohomologyError(f"cochain is not closed (residual {residual:.3g})")
    return [period(c, ch) for ch in cycles]


@dataclass
class Decomposition:
    coefficients: list[list]      # k x p
    potentials: list[list]        # k vertex functions, zero at the root
    residuals: list[float]


def decompose(beta: Cochain, basis: CohomologyBasis, tol: float = 1e-9):
    """Split ``beta`` as sum_j a_j nu_j + dF with F(root) = 0.

    Returns ``(a, F, residual)``.
    """
    K = basis.complex
    a = periods(beta, basis.selected, tol)
    exact = beta.exact
    if not exact:
        a = [float(x) for x in a]
    rest = list(beta.values)
    for aj, nu in zip(a, basis.cochains):
        if aj:
            nv = nu.values if exact else [float(x) for x in nu.values]
            rest = [r - aj * x for r, x in zip(rest, nv)]
    cb = basis.cycles
    F = [0] * K.n_vertices if exact else [0.0] * K.n_vertices
    for v in cb.order[1:]:
        u = cb.parent[v]
        e, s = K.edge_sign(u, v)
        F[v] = F[u] + s * rest[e]
    residual = 0
    for e, (u, v) in enumerate(K.edges):
        residual = max(residual, abs(rest[e] - (F[v] - F[u])))
    if residual > tol:
        raise CohomologyError(f"decomposition residual {float(residual):.3g} exceeds {tol:g}")
    return a, F, float(residual)


def decompose_all(forms: Sequence[Cochain], basis: CohomologyBasis, tol: float = 1e-9) -> Decomposition:
    rows, pots, res = [], [], []
    for beta in forms:
        a, F, r = decompose(beta, basis, tol)
        rows.append(a)
        pots.append(F)
        res.append(r)
    return Decomposition(rows, pots, res)


def assemble(coefficients, potential, basis: CohomologyBasis) -> Cochain:
    """sum_j a_j nu_j + dF, the inverse of :func:`decompose`."""
    K = basis.complex
    exact = all(_is_exact(x) for x in coefficients) and all(_is_exact(x) for x in potential)
    vals = [0 if exact else 0.0] * K.count(1)
    for aj, nu in zip(coefficients, basis.cochains):
        nv = nu.values if exact else [float(x) for x in nu.values]
        vals = [x + aj * y for x, y in zip(vals, nv)]
    for e, (u, v) in enumerate(K.edges):
        vals[e] += potential[v] - potential[u]
    return Cochain(K, 1, vals)


def report(basis: CohomologyBasis, forms: Sequence[Cochain] = (), decomposition: Decomposition | None = None) -> dict:
    """Structured summary: betti number, period table, coefficients."""
    from .report import num
    out = {
        "betti": basis.betti,
        "basis_periods": [[num(x) for x in row] for row in basis.period_matrix],
        "n_fundamental_cycles": basis.cycles.n_fundamental,
        "orientable": basis.complex.orientable,
    }
    if forms:
        out["periods"] = [[num(x) for x in periods(f, basis.selected)] for f in forms]
    if decomposition is not None:
        out["coefficients"] = [[num(x) for x in row] for row in decomposition.coefficients]
        out["residuals"] = [num(x) for x in decomposition.residuals]
    return out


def torus_loops(K: SimplicialComplex, res: int) -> list[Chain]:
    """Meridian (x-direction) and longitude (y-direction) loops through vertex 0
    of :func:`~closedforms.mesh.flat_torus`."""
    loops = []
    for step in ((1, 0), (0, 1)):
        chain = {}
        i = j = 0
        for _ in range(res):
            u = (i % res) + res * (j % res)
            i, j = i + step[0], j + step[1]
            v = (i % res) + res * (j % res)
            e, s = K.edge_sign(u, v)
            chain[e] = chain.get(e, 0) + s
        loops.append(chain)
    return loops
