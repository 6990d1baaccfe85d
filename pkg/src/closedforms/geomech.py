"""Poisson and canonical symplectic structures defined by expressions.

Conventions::

    {f, g}(x) = sum_ij Pi^ij(x) d_i f d_j g
    X_f^i     = sum_j Pi^ij(x) d_j f          so  <dg, X_f> = {g, f}

The canonical structure on R^{2n} uses coordinates (q_1..q_n, p_1..p_n) with
Pi^{q_i p_i} = 1, i.e. {q_i, p_i} = 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .expr import Function


class SystemError_(ValueError):
    """Malformed system definition."""


@dataclass
class SystemDefinition:
    dimension: int
    kind: str                                  # "canonical" | "poisson"
    integrals: list[Function]
    rank: int
    box: np.ndarray                            # N x 2
    bivector: dict = field(default_factory=dict)   # (i, j), i < j -> Function
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("canonical", "poisson"):
            raise SystemError_(f"unknown structure kind {self.kind!r}")
        if self.kind == "canonical" and self.dimension % 2:
            raise SystemError_("canonical structure needs an even dimension")
        if not self.integrals:
            raise SystemError_("at least one first integral is required")
        self.box = np.asarray(self.box, dtype=float)
        if self.box.shape != (self.dimension, 2):
            raise SystemError_("box needs one [lo, hi] pair per coordinate")
        for (i, j) in self.bivector:
            if not 0 <= i < j < self.dimension:
                raise SystemError_(f"bivector entry ({i}, {j}) is not strictly upper triangular")

    @property
    def s(self) -> int:
        return len(self.integrals)

    def pi(self, x) -> np.ndarray:
        N = self.dimension
        P = np.zeros((N, N))
        if self.kind == "canonical":
            n = N // 2
            for i in range(n):
                P[i, n + i] = 1.0
                P[n + i, i] = -1.0
            return P
        for (i, j), fn in self.bivector.items():
            v = fn(x)
            P[i, j] = v
            P[j, i] = -v
        return P

    def pi_with_derivatives(self, x):
        """(Pi, dPi) with dPi[i, j, l] = d_l Pi^ij."""
        N = self.dimension
        P = self.pi(x)
        dP = np.zeros((N, N, N))
        if self.kind == "poisson":
            for (i, j), fn in self.bivector.items():
                _, g = fn.value_and_grad(x)
                dP[i, j] = g
                dP[j, i] = -g
        return P, dP

    def jacobian(self, x) -> np.ndarray:
        """s x N matrix of integral gradients."""
        return np.array([f.grad(x) for f in self.integrals])

    def values(self, x) -> np.ndarray:
        return np.array([f(x) for f in self.integrals])

    def field(self, i: int, x) -> np.ndarray:
        return self.pi(x) @ self.integrals[i].grad(x)

    # -- files ------------------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict, name: str = "") -> "SystemDefinition":
        try:
            N = int(doc["dimension"])
            st = doc["structure"]
            kind = st["kind"]
            integrals = [Function(t, N) for t in doc["integrals"]]
            box = doc.get("box") or [[-1.0, 1.0]] * N
        except KeyError as exc:
            raise SystemError_(f"system file is missing {exc}") from None
        biv = {}
        if kind == "poisson":
            biv = _parse_bivector(st.get("bivector", []), N)
        default_rank = N // 2 if kind == "canonical" else len(integrals)
        return cls(N, kind, integrals, int(doc.get("rank", default_rank)), box, biv, name or doc.get("name", ""))

    def to_dict(self) -> dict:
        N = self.dimension
        st = {"kind": self.kind}
        if self.kind == "poisson":
            st["bivector"] = [[self.bivector[(i, j)].text if (i, j) in self.bivector else "0"
                               for j in range(i + 1, N)] for i in range(N - 1)]
        return {"name": self.name, "dimension": N, "structure": st,
                "integrals": [f.text for f in self.integrals], "rank": self.rank,
                "box": self.box.tolist()}


def _parse_bivector(rows, N):
    """Upper-triangle rows (row i lists entries j = i+1..N-1) or a full
    N x N matrix of which only the strict upper part is read."""
    out = {}
    full = len(rows) == N and all(len(r) == N for r in rows)
    for i, row in enumerate(rows):
        entries = row[i + 1:] if full else row
        if not full and len(row) != N - 1 - i:
            raise SystemError_(f"bivector row {i} must have {N - 1 - i} entries")
        for off, text in enumerate(entries):
            j = i + 1 + off
            text = str(text).strip()
            if text in ("0", "0.0", ""):
                continue
            out[(i, j)] = Function(text, N)
    return out


def load_system(path, name: str = "") -> SystemDefinition:
    with open(path) as fh:
        return SystemDefinition.from_dict(json.load(fh), name)


def _as_function(sys: SystemDefinition, f) -> Function:
    if isinstance(f, Function):
        return f
    if isinstance(f, int):
        return sys.integrals[f]
    return Function(f, sys.dimension)


def poisson_bracket(sys: SystemDefinition, f, g, x) -> float:
    x = np.asarray(x, dtype=float)
    df = _as_function(sys, f).grad(x)
    dg = _as_function(sys, g).grad(x)
    return float(df @ sys.pi(x) @ dg)


def hamiltonian_field(sys: SystemDefinition, f, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return sys.pi(x) @ _as_function(sys, f).grad(x)


def schouten_residual(sys: SystemDefinition, x) -> float:
    """max_ijk |sum_l Pi^li d_l Pi^jk + Pi^lj d_l Pi^ki + Pi^lk d_l Pi^ij|."""
    if sys.kind == "canonical":
        return 0.0
    P, dP = sys.pi_with_derivatives(np.asarray(x, dtype=float))
    # T[i, j, k] = sum_l P[l, i] dP[j, k, l]
    T = np.einsum("li,jkl->ijk", P, dP)
    cyc = T + np.transpose(T, (1, 2, 0)) + np.transpose(T, (2, 0, 1))
    return float(np.abs(cyc).max()) if cyc.size else 0.0


def jacobi_residual(sys: SystemDefinition, points) -> float:
    return max((schouten_residual(sys, x) for x in points), default=0.0)


def involution_pairs(sys: SystemDefinition):
    """Pairs (i, j), i < r, i < j < s: all pairs when r = s."""
    r, s = min(sys.rank, sys.s), sys.s
    return [(i, j) for i in range(r) for j in range(i + 1, s)]


def involution_check(sys: SystemDefinition, points, pairs=None) -> float:
    pairs = involution_pairs(sys) if pairs is None else pairs
    worst = 0.0
    for x in points:
        x = np.asarray(x, dtype=float)
        J = sys.jacobian(x)
        P = sys.pi(x)
        for i, j in pairs:
            worst = max(worst, abs(float(J[i] @ P @ J[j])))
    return worst


def sample_box(sys: SystemDefinition, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = sys.box[:, 0], sys.box[:, 1]
    return lo + (hi - lo) * rng.random((count, sys.dimension))


def numerical_rank(M: np.ndarray, tol: float = 1e-8) -> int:
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > tol * max(1.0, sv[0])))


@dataclass
class ClassificationVerdict:
    regular_fraction: float
    involution_residual: float
    jacobi_residual: float
    pi_rank: int                 # generic rank of Pi, even
    jacobian_rank: int           # generic rank of dF
    field_rank: int              # generic rank of X_{f_1..f_r}
    verdict: str
    integrable: bool
    commutative: bool
    reason: str = ""


def classify_system(sys: SystemDefinition, samples: int | Sequence = 1000, seed: int = 0,
                    tol: float = 1e-9, regular_fraction: float = 0.95) -> ClassificationVerdict:
    pts = sample_box(sys, samples, seed) if isinstance(samples, int) else np.asarray(samples, dtype=float)
    N, s, r = sys.dimension, sys.s, sys.rank
    commutative = r == s
    jac = jacobi_residual(sys, pts)
    inv = involution_check(sys, pts)
    pi_rank = jac_rank = field_rank = 0
    regular = 0
    for x in pts:
        J = sys.jacobian(x)
        P = sys.pi(x)
        X = P @ J[:r].T if r <= s else np.zeros((N, 0))
        rj, rx, rp = numerical_rank(J), numerical_rank(X), numerical_rank(P)
        jac_rank, field_rank, pi_rank = max(jac_rank, rj), max(field_rank, rx), max(pi_rank, rp)
        if rj == s and rx == min(r, s):
            regular += 1
    frac = regular / len(pts) if len(pts) else 0.0

    reasons = []
    if r > s:
        reasons.append(f"rank parameter r={r} exceeds number of integrals s={s}")
    if r + s != N:
        reasons.append(f"r + s = {r + s} differs from dimension {N}")
    if jac > tol:
        reasons.append(f"Jacobi identity fails (residual {jac:.3g})")
    if inv > tol:
        reasons.append(f"integrals not in involution (residual {inv:.3g})")
    if jac_rank < s:
        reasons.append(f"dF rank {jac_rank} < {s} everywhere sampled")
    elif frac < regular_fraction:
        reasons.append(f"only {frac:.1%} of samples are regular")
    if pi_rank > 2 * r:
        reasons.append(f"Poisson rank {pi_rank} exceeds 2r = {2 * r}")
    if sys.kind == "canonical" and commutative and s != N // 2:
        reasons.append(f"symplectic system needs s = {N // 2} integrals")

    if reasons:
        verdict = "not integrable: " + "; ".join(reasons)
    elif commutative:
        verdict = "commutative Liouville"
    else:
        verdict = f"non-commutative rank {r}"
    return ClassificationVerdict(frac, inv, jac, pi_rank, jac_rank, field_rank, verdict,
                                 not reasons, commutative and not reasons, "; ".join(reasons))
