"""Numerical certification that a regular fiber is a torus.

A compact regular fiber carries r commuting Hamiltonian fields; the joint
flow returns the anchor point to itself exactly on a lattice of times, and a
full-rank lattice is the computational witness of the torus.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .geomech import ClassificationVerdict, SystemDefinition, classify_system, numerical_rank


class FlowError(RuntimeError):
    pass


class ProjectionError(RuntimeError):
    pass


@dataclass
class FlowOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "DOP853"
    box_margin: float = 0.0


@dataclass
class LatticeSearch:
    t_max: float = 20.0
    grid: int = 64
    return_tol: float = 1e-8
    scan_rtol: float = 1e-8        # coarse integration for the grid scan
    max_newton: int = 30


def _rhs(sys: SystemDefinition, i: int):
    f = sys.integrals[i]
    if sys.kind == "canonical":
        n = sys.dimension // 2

        def rhs(_t, x):
            g = f.grad(x)
            return np.concatenate([g[n:], -g[:n]])
        return rhs
    return lambda _t, x: sys.pi(x) @ f.grad(x)


def _check_box(sys, ys, margin):
    lo, hi = sys.box[:, 0] - margin, sys.box[:, 1] + margin
    bad = np.any((ys < lo[:, None]) | (ys > hi[:, None]), axis=0)
    if np.any(bad):
        raise FlowError("trajectory left the system box")


def flow(sys: SystemDefinition, i: int, t: float, x, opts: FlowOptions | None = None,
         t_eval: Sequence[float] | None = None):
    """Flow of X_{f_i} for time t.  With ``t_eval`` returns the states at those
    times (columns), otherwise the end point."""
    opts = opts or FlowOptions()
    x = np.asarray(x, dtype=float)
    if t == 0:
        return x.copy() if t_eval is None else np.repeat(x[:, None], len(t_eval), axis=1)
    sol = solve_ivp(_rhs(sys, i), (0.0, t), x, method=opts.method, rtol=opts.rtol,
                    atol=opts.atol, t_eval=t_eval)
    if not sol.success:
        raise FlowError(f"integration of field {i} failed: {sol.message}")
    _check_box(sys, sol.y, opts.box_margin)
    return sol.y[:, -1].copy() if t_eval is None else sol.y


def joint_flow(sys: SystemDefinition, fields: Sequence[int], t, x, opts: FlowOptions | None = None):
    """Phi^{f_1}_{t_1} o ... o Phi^{f_r}_{t_r}(x): the last field acts first."""
    y = np.asarray(x, dtype=float)
    for i, ti in reversed(list(zip(fields, t))):
        y = flow(sys, i, float(ti), y, opts)
    return y


def commutation_residual(sys, i, j, x, t, s, opts: FlowOptions | None = None) -> float:
    a = flow(sys, i, t, flow(sys, j, s, x, opts), opts)
    b = flow(sys, j, s, flow(sys, i, t, x, opts), opts)
    return float(np.linalg.norm(a - b))


# --- level sets ---------------------------------------------------------------

@dataclass
class LevelSetSample:
    level: np.ndarray
    point: np.ndarray
    jacobian_rank: int
    pi_rank: int
    iterations: int
    residual: float


def project_to_level(sys: SystemDefinition, c, guess, tol: float = 1e-10, max_iter: int = 100,
                     rank_tol: float = 1e-8, seed: int = 0) -> LevelSetSample:
    """Gauss-Newton on |F(x) - c|^2 with pseudo-inverse steps.

    At an iterate where dF drops rank before convergence the point is nudged
    by a fixed small random vector (critical points of F are unstable for the
    iteration but exact fixed points of it).
    """
    c = np.asarray(c, dtype=float)
    x = np.asarray(guess, dtype=float).copy()
    rng = np.random.default_rng(seed)
    it = 0
    step = np.inf
    r = sys.values(x) - c
    while np.max(np.abs(r)) > tol or (it > 0 and step > tol):
        if it >= max_iter:
            raise ProjectionError(f"no convergence in {max_iter} iterations (residual {np.max(np.abs(r)):.3g})")
        J = sys.jacobian(x)
        dx = -np.linalg.pinv(J, rcond=1e-14) @ r
        unreachable = np.linalg.norm(r + J @ dx)
        if unreachable > 0.5 * np.linalg.norm(r) and unreachable > tol:
            # residual mostly outside the range of dF: sitting on a critical set
            x = x + 1e-3 * rng.standard_normal(x.size)
            r = sys.values(x) - c
            it += 1
            continue
        lam, r0 = 1.0, np.linalg.norm(r)
        while True:
            xn = x + lam * dx
            rn = sys.values(xn) - c
            if np.linalg.norm(rn) < r0 or lam < 1e-4:
                break
            lam /= 2
        step = float(np.linalg.norm(lam * dx))
        x, r = xn, rn
        it += 1
    J = sys.jacobian(x)
    jr = numerical_rank(J, rank_tol)
    pr = numerical_rank(sys.pi(x), rank_tol)
    if jr < sys.s:
        raise ProjectionError(f"level point {x.tolist()} is not regular: dF has rank {jr} < {sys.s}")
    return LevelSetSample(c, x, jr, pr, it, float(np.max(np.abs(r))))


# --- coframe ----------------------------------------------------------------------

@dataclass
class DualCoframe:
    point: np.ndarray
    fields: np.ndarray        # N x r, columns X_i
    covectors: np.ndarray     # r x N, rows beta_i, supported on span(X)
    pairing_residual: float
    commutator_residuals: dict = field(default_factory=dict)


def field_matrix(sys: SystemDefinition, x, fields: Sequence[int]) -> np.ndarray:
    P = sys.pi(x)
    return np.array([P @ sys.integrals[i].grad(x) for i in fields]).T


def fiber_fields(sys: SystemDefinition) -> list[int]:
    """Indices of the fields generating the fiber torus."""
    return list(range(min(sys.rank, sys.s)))


def dual_coframe(sys: SystemDefinition, sample: LevelSetSample | np.ndarray, fields=None,
                 times=(0.5, 1.0), opts: FlowOptions | None = None, tol: float = 1e-8) -> DualCoframe:
    x = sample.point if isinstance(sample, LevelSetSample) else np.asarray(sample, dtype=float)
    fields = fiber_fields(sys) if fields is None else list(fields)
    X = field_matrix(sys, x, fields)
    if numerical_rank(X, tol) < len(fields) or np.linalg.norm(X) == 0:
        raise ValueError(f"Hamiltonian fields are dependent at {x.tolist()}")
    G = X.T @ X
    B = np.linalg.solve(G, X.T)          # beta_i(v) = (G^{-1} X^T v)_i
    resid = float(np.max(np.abs(B @ X - np.eye(len(fields)))))
    comm = {}
    for a in range(len(fields)):
        for b in range(a + 1, len(fields)):
            comm[(fields[a], fields[b])] = max(
                commutation_residual(sys, fields[a], fields[b], x, t, s, opts)
                for t, s in product(times, times))
    return DualCoframe(x, X, B, resid, comm)


# --- period lattice ------------------------------------------------------------------

@dataclass
class PeriodLattice:
    returns: list[np.ndarray]
    basis: list[np.ndarray]
    rank: int
    residuals: list[float]           # |Phi_t(m) - m| per basis vector
    coherence: float                 # worst integer-reconstruction error over returns
    verdict: str
    candidates: int = 0


def _scan(sys, fields, x, ts, opts):
    """Distance |Phi_t(x) - x| on the full grid ts^r."""
    r = len(fields)
    G = len(ts)

    def rec(level, y):
        # level counts down: the last field acts first
        traj = flow(sys, fields[level], ts[-1], y, opts, t_eval=ts)
        if level == 0:
            return np.linalg.norm(traj - x[:, None], axis=0)
        return np.stack([rec(level - 1, traj[:, g]) for g in range(G)], axis=-1)

    D = rec(r - 1, x)
    # rec builds axes in order (field 0, field 1, ...)
    return D.reshape((G,) * r)


def _local_minima(D):
    mask = np.ones(D.shape, dtype=bool)
    for ax in range(D.ndim):
        fwd = np.full(D.shape, np.inf)
        bwd = np.full(D.shape, np.inf)
        sl_a = [slice(None)] * D.ndim
        sl_b = [slice(None)] * D.ndim
        sl_a[ax], sl_b[ax] = slice(1, None), slice(None, -1)
        fwd[tuple(sl_b)] = D[tuple(sl_a)]
        bwd[tuple(sl_a)] = D[tuple(sl_b)]
        mask &= (D <= fwd) & (D <= bwd)
    return np.argwhere(mask)


def refine_return(sys, fields, x, t0, search: LatticeSearch, opts: FlowOptions):
    t = np.array(t0, dtype=float)
    res = np.inf
    for _ in range(search.max_newton):
        y = joint_flow(sys, fields, t, x, opts)
        R = y - x
        res = float(np.linalg.norm(R))
        if res < search.return_tol * 1e-2:
            break
        J = field_matrix(sys, y, fields)
        dt = -np.linalg.lstsq(J, R, rcond=None)[0]
        t = t + dt
        if np.any(t < -1e-6) or np.any(t > 2 * search.t_max):
            break
        if np.linalg.norm(dt) < 1e-14:
            break
    return t, res


def period_lattice(sys: SystemDefinition, sample, search: LatticeSearch | None = None,
                   fields=None, opts: FlowOptions | None = None) -> PeriodLattice:
    search = search or LatticeSearch()
    opts = opts or FlowOptions()
    x = sample.point if isinstance(sample, LevelSetSample) else np.asarray(sample, dtype=float)
    fields = fiber_fields(sys) if fields is None else list(fields)
    r = len(fields)
    ts = np.linspace(0.0, search.t_max, search.grid)
    h = ts[1] - ts[0]
    scan_opts = FlowOptions(search.scan_rtol, search.scan_rtol * 1e-2, opts.method, opts.box_margin)
    D = _scan(sys, fields, x, ts, scan_opts)
    speed = np.linalg.norm(field_matrix(sys, x, fields), axis=0).sum()
    coarse = speed * h
    cands = [idx for idx in _local_minima(D) if D[tuple(idx)] <= coarse and np.any(idx > 0)]
    found = []
    for idx in sorted(cands, key=lambda ix: (float(np.linalg.norm(ts[ix])), tuple(ix))):
        t, res = refine_return(sys, fields, x, ts[idx], search, opts)
        if res > search.return_tol or np.linalg.norm(t) < h / 2 or np.any(t < -1e-9):
            continue
        if any(np.linalg.norm(t - u) < 1e-6 for u in found):
            continue
        found.append(t)
    found.sort(key=lambda t: (round(float(np.linalg.norm(t)), 9), tuple(np.round(t, 9))))

    basis = []
    for t in found:
        M = np.array(basis + [t])
        if numerical_rank(M, 1e-6) == len(basis) + 1:
            basis.append(t)
        if len(basis) == r:
            break
    # present the basis with its dominant components on the diagonal where possible
    basis.sort(key=lambda t: (int(np.argmax(np.abs(t))), -float(np.max(np.abs(t)))))
    residuals = [float(np.linalg.norm(joint_flow(sys, fields, b, x, opts) - x)) for b in basis]
    coherence = 0.0
    if basis:
        B = np.array(basis).T
        for t in found:
            coef = np.linalg.lstsq(B, t, rcond=None)[0]
            coherence = max(coherence, float(np.linalg.norm(B @ np.round(coef) - t)))
    if not found:
        verdict = "inconclusive: no returns found within t_max"
    elif len(basis) == r and coherence < 1e-5:
        verdict = f"torus T^{r}"
    elif len(basis) < r:
        verdict = f"inconclusive: lattice rank {len(basis)} < {r}"
    else:
        verdict = "inconclusive: returns are not integer combinations of the basis"
    return PeriodLattice(found, basis, len(basis), residuals, coherence, verdict, len(cands))


# --- aggregate ----------------------------------------------------------------------------

@dataclass
class FiberVerdict:
    level: list[float]
    classification: ClassificationVerdict
    anchor: np.ndarray | None = None
    projection_error: str = ""
    anchor_residual: float | None = None
    coframe: DualCoframe | None = None
    commutation_residual: float | None = None
    conservation_residual: float | None = None
    lattice: PeriodLattice | None = None
    verdict: str = "inconclusive"


def conservation_residual(sys: SystemDefinition, x, fields, t: float = 1.0, opts=None) -> float:
    """max |f_k(Phi^i_t(x)) - f_k(x)| over flows i and all integrals k."""
    f0 = sys.values(x)
    worst = 0.0
    for i in fields:
        y = flow(sys, i, t, x, opts)
        worst = max(worst, float(np.max(np.abs(sys.values(y) - f0))))
    return worst


def fiber_verdict(sys: SystemDefinition, c, guesses, search: LatticeSearch | None = None,
                  samples: int = 1000, seed: int = 0, opts: FlowOptions | None = None) -> FiberVerdict:
    cls = classify_system(sys, samples, seed)
    out = FiberVerdict([float(v) for v in c], cls)
    errors = []
    sample = None
    for g in guesses:
        try:
            sample = project_to_level(sys, c, g, seed=seed)
            break
        except ProjectionError as exc:
            errors.append(str(exc))
    if sample is None:
        out.projection_error = "; ".join(errors)
        out.verdict = "inconclusive: anchor not regular" if any("not regular" in e for e in errors) \
            else "inconclusive: projection failed"
        return out
    out.anchor, out.anchor_residual = sample.point, sample.residual
    if not cls.integrable:
        out.verdict = "inconclusive: system not integrable"
        return out
    fields = fiber_fields(sys)
    try:
        out.coframe = dual_coframe(sys, sample, fields, opts=opts)
    except ValueError as exc:
        out.projection_error = str(exc)
        out.verdict = "inconclusive: anchor not regular"
        return out
    out.commutation_residual = max(out.coframe.commutator_residuals.values(), default=0.0)
    out.conservation_residual = conservation_residual(sys, sample.point, fields, opts=opts)
    out.lattice = period_lattice(sys, sample, search, fields, opts)
    out.verdict = out.lattice.verdict
    return out
