"""Fibrations of a closed manifold over a torus built from closed 1-forms.

Pipeline: decompose each form over an integral H^1 basis, move the
coefficients to nearby rationals without losing pointwise independence,
clear denominators, integrate to circle-valued maps and certify the product
map as a submersion onto T^k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

from .cohomology import CohomologyBasis, Decomposition, assemble, period
from .mesh import Cochain, SimplicialComplex, independence_report
from .rational import approximate, lcm_denominators

EPS_FLOOR = 1e-13
REGULAR_TRIES = 8


class TischlerError(RuntimeError):
    pass


@dataclass
class TischlerCoefficients:
    a: list[list]                 # original coefficients, k x p
    q: list[list[Fraction]]       # rational replacements
    N: list[int]
    k: list[list[int]]            # N_i * q_ij
    eps: float                    # largest |q_ij - a_ij| actually applied
    eps_threshold: float          # approximation bound that passed
    attempts: int = 1


def rationalize(decomp: Decomposition, basis: CohomologyBasis, forms: Sequence[Cochain] | None = None,
                eps0: float = 1e-4, tol: float = 1e-9) -> TischlerCoefficients:
    """Replace coefficients by continued-fraction convergents, halving the
    bound until the perturbed forms are still pointwise independent."""
    if forms is not None and not independence_report(forms, tol).passed:
        raise TischlerError("input forms are not pointwise independent")
    eps = eps0
    attempts = 0
    while eps >= EPS_FLOOR:
        attempts += 1
        q = [[approximate(a, eps) for a in row] for row in decomp.coefficients]
        perturbed = [assemble([float(x) for x in qrow], F, basis)
                     for qrow, F in zip(q, decomp.potentials)]
        if independence_report(perturbed, tol).passed:
            N, k = integerize(q)
            shift = max((abs(float(Fraction(x) - Fraction(a))) for qr, ar in zip(q, decomp.coefficients)
                         for x, a in zip(qr, ar)), default=0.0)
            return TischlerCoefficients(decomp.coefficients, q, N, k, shift, eps, attempts)
        eps /= 2
    raise TischlerError(f"no rational perturbation above {EPS_FLOOR:g} keeps the forms independent")


def integerize(q) -> tuple[list[int], list[list[int]]]:
    N, k = [], []
    for row in q:
        n = lcm_denominators(row)
        N.append(n)
        k.append([int(Fraction(x) * n) for x in row])
    return N, k


@dataclass
class FibrationMap:
    complex: SimplicialComplex = field(repr=False)
    values: np.ndarray             # V x k, in [0, 1)
    exact_part: list[list[Fraction]]  # tree integral of sum_j k_ij nu_j, mod 1
    cochains: list[Cochain]        # integral-period parts of beta'_i
    potentials: list[list]         # H_i
    base: int

    @property
    def k(self) -> int:
        return self.values.shape[1]


def build_fibration_map(kmat, basis: CohomologyBasis, potentials=None, base: int | None = None) -> FibrationMap:
    """Integrate beta'_i = sum_j k_ij nu_j + dH_i to maps M -> R/Z."""
    K = basis.complex
    cb = basis.cycles
    if base is not None and base != cb.root:
        raise TischlerError("base vertex must be the spanning-tree root")
    kcount = len(kmat)
    if potentials is None:
        potentials = [[0] * K.n_vertices for _ in range(kcount)]
    values = np.zeros((K.n_vertices, kcount))
    exact_parts, cochains = [], []
    for i, row in enumerate(kmat):
        if any(int(x) != x for x in row):
            raise TischlerError("coefficients must be integers")
        vals = [Fraction(0)] * K.count(1)
        for kij, nu in zip(row, basis.cochains):
            if kij:
                vals = [a + int(kij) * b for a, b in zip(vals, nu.values)]
        kappa = Cochain(K, 1, vals)
        theta = [Fraction(0)] * K.n_vertices
        for v in cb.order[1:]:
            u = cb.parent[v]
            e, s = K.edge_sign(u, v)
            theta[v] = theta[u] + s * vals[e]
        for e in cb.chords:
            u, v = K.edges[e]
            if (theta[v] - theta[u] - vals[e]).denominator != 1:
                raise TischlerError(f"non-integer period across chord {K.edges[e]}")
        theta = [t - math.floor(t) for t in theta]
        H = potentials[i]
        values[:, i] = np.mod(np.array([float(t) for t in theta]) + np.array([float(h) for h in H]), 1.0)
        exact_parts.append(theta)
        cochains.append(kappa)
    values[values >= 1.0] = 0.0
    return FibrationMap(K, values, exact_parts, cochains, [list(h) for h in potentials], cb.root)


def wrap(x):
    """Representative in (-1/2, 1/2]."""
    return x - np.ceil(x - 0.5)


def edge_compatibility(theta: FibrationMap) -> tuple[bool, float]:
    """Exact check on the integral part, float check on the potentials."""
    K = theta.complex
    worst = 0.0
    for i, kappa in enumerate(theta.cochains):
        ex, H = theta.exact_part[i], theta.potentials[i]
        for e, (u, v) in enumerate(K.edges):
            if (ex[v] - ex[u] - kappa.values[e]).denominator != 1:
                return False, math.inf
            target = float(kappa.values[e]) + float(H[v]) - float(H[u])
            worst = max(worst, abs(float(wrap(theta.values[v, i] - theta.values[u, i] - target))))
    return worst < 1e-9, worst


def pullback_periods(theta: FibrationMap, cycles) -> list[list[int]]:
    """Winding numbers of each component of Theta around each cycle.

    Raises if a winding sum is not within 1e-6 of an integer.
    """
    out = []
    for i in range(theta.k):
        row = []
        for chain in cycles:
            total = 0.0
            for e, c in chain.items():
                u, v = theta.complex.edges[e]
                total += c * float(wrap(theta.values[v, i] - theta.values[u, i]))
            w = round(total)
            if abs(total - w) > 1e-6:
                raise TischlerError(f"winding sum {total!r} is not an integer")
            row.append(int(w))
        out.append(row)
    return out


# --- certification -----------------------------------------------------------

@dataclass
class FibrationCertificate:
    k: int
    n: int
    ranks: list[int]
    min_singular: float
    offending: list[int]
    coverage: float
    bins: int
    regular_values: list[tuple]
    fiber_counts: list[int]
    rejected_values: int
    verdict: str                 # "fibration" | "covering" | "fail"
    degree: int | None = None
    reason: str = ""


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb, key=str)] = min(ra, rb, key=str)


def _in_hull(points: np.ndarray, y: np.ndarray, tol: float) -> bool:
    if points.shape[1] == 1:
        return points.min() - tol <= y[0] <= points.max() + tol
    A = np.vstack([points.T, np.ones(len(points))])
    b = np.append(y, 1.0)
    _, res = nnls(A, b)
    return res <= tol


class _SimplexImage:
    """Lifted image of one top simplex under Theta, in R^k."""

    def __init__(self, pts: np.ndarray):
        self.pts = pts              # (n+1) x k
        self.base = pts[0]
        k = pts.shape[1]
        n1 = pts.shape[0]
        spread = pts[1:] - pts[0]
        if np.linalg.matrix_rank(spread, tol=1e-12) < k:
            self.kind = "flat"          # no interior; contains no regular value
        elif k == 1:
            self.kind = "interval"
            self.lo, self.hi = pts.min(), pts.max()
        elif n1 == k + 1:
            self.kind = "simplex"
            A = spread.T
            self.Ainv = np.linalg.inv(A)
            grads = np.vstack([-self.Ainv.sum(axis=0), self.Ainv])
            self.gnorm = np.linalg.norm(grads, axis=1)
        else:
            from scipy.spatial import ConvexHull
            self.kind = "hull"
            self.eq = ConvexHull(pts).equations

    def distances(self, Y: np.ndarray) -> np.ndarray:
        """Signed distance (positive inside) to the boundary, per row of Y."""
        if self.kind == "flat":
            return np.full(len(Y), -np.inf)
        if self.kind == "interval":
            y = Y[:, 0]
            return np.minimum(y - self.lo, self.hi - y)
        if self.kind == "simplex":
            lam = (Y - self.base) @ self.Ainv.T
            lam = np.hstack([1 - lam.sum(axis=1, keepdims=True), lam])
            return (lam / self.gnorm).min(axis=1)
        return -(Y @ self.eq[:, :-1].T + self.eq[:, -1]).max(axis=1)


def verify_fibration(theta: FibrationMap, bins: int = 16, guard: float = 1e-6,
                     sv_tol: float = 1e-9) -> FibrationCertificate:
    K = theta.complex
    n, k = K.dimension, theta.k
    V = theta.values
    ranks, offending, min_sv = [], [], math.inf
    images = []
    for t, s in enumerate(K.top):
        idx = list(s)
        inc = wrap(V[idx] - V[idx[0]])
        # every edge increment must be the difference of the lifted vertices
        for a in range(len(idx)):
            for b in range(a + 1, len(idx)):
                d = wrap(V[idx[b]] - V[idx[a]])
                if np.any(np.abs(d) >= 0.5 - 1e-9) or np.any(np.abs(d - (inc[b] - inc[a])) > 1e-9):
                    raise TischlerError(f"edge increment reaches 1/2 on simplex {s}; refine the mesh")
        E = K.edge_matrix(s)
        J = inc[1:].T @ np.linalg.pinv(E).T      # k x d differential
        sv = np.linalg.svd(J, compute_uv=False)
        r = int(np.sum(sv > sv_tol))
        ranks.append(r)
        min_sv = min(min_sv, float(sv[k - 1]) if len(sv) >= k else 0.0)
        if r < k:
            offending.append(t)
        images.append(_SimplexImage(V[idx[0]] + inc))

    axes = (np.arange(bins) + 0.5) / bins
    Y = np.array(np.meshgrid(*([axes] * k), indexing="ij")).reshape(k, -1).T
    # Bin centers can sit exactly on vertex levels of a structured mesh, so
    # each bin also gets a few deterministic off-center candidates (Kronecker
    # sequence, half a bin wide) for the regular-value test.
    alpha = np.sqrt(np.array([2.0, 3.0, 5.0, 7.0, 11.0, 13.0])[:k]) % 1.0
    shifts = np.vstack([np.zeros(k)] + [((m * alpha) % 1.0 - 0.5) / (2 * bins)
                                         for m in range(1, REGULAR_TRIES)])
    C = (Y[None, :, :] + shifts[:, None, :]).reshape(-1, k) % 1.0
    hit = np.zeros(len(C), dtype=bool)
    near = np.zeros(len(C), dtype=bool)
    containing = [[] for _ in range(len(C))]
    for t, img in enumerate(images):
        Yl = img.base + wrap(C - img.base)
        d = img.distances(Yl)
        hit |= d >= -1e-9
        near |= np.abs(d) <= guard
        for j in np.nonzero(d > guard)[0]:
            containing[j].append(t)
    nb = len(Y)
    coverage = float(hit[:nb].mean())

    regular, counts, rejected = [], [], 0
    for b in range(nb):
        pick = next((m * nb + b for m in range(REGULAR_TRIES) if not near[m * nb + b]), None)
        if pick is None:
            rejected += 1
            continue
        regular.append(tuple(float(x) for x in C[pick]))
        counts.append(_count_components(K, images, containing[pick], C[pick]))

    verdict, degree, reason = "fail", None, ""
    if offending:
        reason = f"rank deficient on {len(offending)} simplices"
    elif coverage < 1.0:
        reason = f"image misses {int(round((1 - coverage) * len(Y)))} of {len(Y)} bins"
    elif k == n:
        verdict = "covering"
        if counts and len(set(counts)) == 1:
            degree = counts[0]
        else:
            reason = "preimage counts are not constant"
    else:
        verdict = "fibration"
    return FibrationCertificate(k, n, ranks, min_sv, offending, coverage, bins,
                                regular, counts, rejected, verdict, degree, reason)


def _count_components(K, images, simplices, y) -> int:
    if not simplices:
        return 0
    n = K.dimension
    uf = _UnionFind()
    for t in simplices:
        uf.find(("s", t))
        s = K.top[t]
        img = images[t]
        yl = img.base + wrap(y - img.base)
        for drop in range(n + 1):
            face = tuple(sorted(v for i, v in enumerate(s) if i != drop))
            pts = np.delete(img.pts, drop, axis=0)
            if _in_hull(pts, yl, 1e-9):
                uf.union(("s", t), ("f", face))
    return len({uf.find(("s", t)) for t in simplices})


def covering_report(cert: FibrationCertificate) -> dict:
    if cert.k != cert.n:
        raise TischlerError("covering report needs as many forms as the dimension")
    if cert.offending:
        raise TischlerError("certificate is rank deficient; no covering verdict")
    counts = sorted(set(cert.fiber_counts))
    consistent = len(counts) == 1
    out = {"consistent": consistent, "preimage_counts": counts, "degree": cert.degree}
    n = cert.n
    if not consistent:
        out["statement"] = "inconsistent preimage counts; regular-value sampling failed"
    elif cert.degree == 1:
        out["statement"] = f"Theta is a diffeomorphism; M is diffeomorphic to T^{n}"
    else:
        out["statement"] = (f"Theta is a {cert.degree}-sheeted covering; "
                            f"M is diffeomorphic to T^{n} (a connected finite cover of a torus is a torus)")
    out["theta_is_diffeomorphism"] = consistent and cert.degree == 1
    out["manifold_is_torus"] = consistent
    return out
